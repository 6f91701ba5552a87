#include "support.hpp"

#include "nde/dataset.hpp"
#include "nde/errors.hpp"
#include "nde/synthesis.hpp"

#include <set>

using namespace nde;
namespace fs = std::filesystem;

namespace {

void make_scene(const fs::path& root, const std::string& id, const std::vector<std::pair<double, double>>& variants,
                int size = 8) {
    std::mt19937_64 rng(std::hash<std::string>{}(id));
    save_image(testing::random_image(rng, size, size, 3), root / "clear" / (id + ".png"));
    for (const auto& [a, b] : variants) {
        save_image(testing::random_image(rng, size, size, 3), root / "hazy" / (format_hazy_name(id, a, b) + ".png"));
    }
}

Manifest synthetic_manifest(std::size_t n) {
    Manifest m;
    for (std::size_t i = 0; i < n; ++i) {
        SceneRecord s;
        s.scene_id = std::to_string(1000 + i);
        s.clear_path = "clear/" + s.scene_id + ".png";
        s.variants = {{"hazy/" + s.scene_id + "_1_0.08.png", 1.0, 0.08}};
        m.scenes.push_back(s);
    }
    return m;
}

// Image whose channels encode the pixel's own coordinates.
Image coordinate_image(int h, int w) {
    Image img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img(y, x, 0) = static_cast<double>(y) / (h - 1);
            img(y, x, 1) = static_cast<double>(x) / (w - 1);
            img(y, x, 2) = 0.5;
        }
    return img;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("hazy file names") {
    const auto n = parse_hazy_name("2945_1_0.16");
    REQUIRE(n);
    CHECK(n->scene_id == "2945");
    CHECK(n->airlight == 1.0);
    CHECK(n->beta == 0.16);
    const auto u = parse_hazy_name("scene_a_0.8_0.08");
    REQUIRE(u);
    CHECK(u->scene_id == "scene_a");
    CHECK(u->airlight == 0.8);
    CHECK_FALSE(parse_hazy_name("2945"));
    CHECK_FALSE(parse_hazy_name("2945_x_0.1"));
    CHECK(format_hazy_name("1001", 1.0, 0.08) == "1001_1_0.08");
    CHECK(format_hazy_name("1001", 0.8, 0.16) == "1001_0.8_0.16");
}

TEST_CASE("filter keeps exactly the requested variants") {
    testing::TempDir dir("manifest");
    for (int i = 0; i < 5; ++i) {
        make_scene(dir.path(), std::to_string(2000 + i), {{1.0, 0.04}, {1.0, 0.08}, {1.0, 0.16}, {0.8, 0.08}});
    }
    const Manifest m = build_manifest(dir.path());
    REQUIRE(m.scenes.size() == 5);
    CHECK(m.hazy_count() == 10);
    for (const auto& s : m.scenes) {
        CHECK(s.variants.size() == 2);
        for (const auto& v : s.variants) {
            CHECK(v.airlight == 1.0);
            CHECK((v.beta == 0.08 || v.beta == 0.16));
        }
    }
    CHECK(m.scenes.front().scene_id == "2000");
    CHECK(m.scenes.back().scene_id == "2004");
}

TEST_CASE("scenes without matching variants are excluded with a warning") {
    testing::TempDir dir("excluded");
    make_scene(dir.path(), "a", {{1.0, 0.08}});
    make_scene(dir.path(), "b", {{1.0, 0.3}});
    const Manifest m = build_manifest(dir.path());
    REQUIRE(m.scenes.size() == 1);
    CHECK(m.scenes[0].scene_id == "a");
    CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("empty and missing roots") {
    testing::TempDir dir("empty");
    const Manifest m = build_manifest(dir.path());
    CHECK(m.scenes.empty());
    CHECK(m.hazy_count() == 0);
    CHECK_THROWS_AS(build_manifest(dir / "nope"), IoError);
}

TEST_CASE("duplicate scene ids are rejected") {
    testing::TempDir dir("dup");
    make_scene(dir.path(), "7", {{1.0, 0.08}});
    save_image(Image(8, 8, 3, 0.5), dir / "clear/7.jpg");
    CHECK_THROWS_AS(build_manifest(dir.path()), ManifestError);
}

TEST_CASE("split arithmetic") {
    CHECK(test_scene_count(2061) == 515);
    CHECK(2061 - test_scene_count(2061) == 1546);
    CHECK(test_scene_count(4) == 1);
    CHECK(test_scene_count(8) == 2);
    CHECK(test_scene_count(2) == 1);
    const Manifest m = split_scenes(synthetic_manifest(4), 42);
    CHECK(m.scene_count(Partition::Train) == 3);
    CHECK(m.scene_count(Partition::Test) == 1);
    CHECK_THROWS_AS(split_scenes(synthetic_manifest(1), 1), SplitError);
}

TEST_CASE("splits are seed-deterministic and scene-disjoint") {
    const Manifest base = synthetic_manifest(37);
    std::set<std::vector<Partition>> distinct;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Manifest a = split_scenes(base, seed);
        const Manifest b = split_scenes(base, seed);
        std::vector<Partition> pa;
        std::set<std::string> train, test;
        for (std::size_t i = 0; i < a.scenes.size(); ++i) {
            CHECK(a.scenes[i].split == b.scenes[i].split);
            CHECK(a.scenes[i].split != Partition::Unassigned);
            pa.push_back(a.scenes[i].split);
            (a.scenes[i].split == Partition::Train ? train : test).insert(a.scenes[i].scene_id);
        }
        for (const auto& id : test) CHECK(train.count(id) == 0);
        CHECK(test.size() == test_scene_count(37));
        distinct.insert(pa);
    }
    CHECK(distinct.size() > 1);
}

TEST_CASE("manifest json round trip") {
    testing::TempDir dir("json");
    Manifest m = split_scenes(synthetic_manifest(6), 9);
    m.root = dir.path();
    save_manifest(m, dir / "m.json");
    const Manifest back = load_manifest(dir / "m.json");
    CHECK(back.seed == m.seed);
    REQUIRE(back.scenes.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(back.scenes[i].scene_id == m.scenes[i].scene_id);
        CHECK(back.scenes[i].split == m.scenes[i].split);
        CHECK(back.scenes[i].variants[0].beta == m.scenes[i].variants[0].beta);
    }
}

TEST_CASE("paired transform yields identical crops") {
    std::mt19937_64 rng(17);
    const Image coords = coordinate_image(40, 50);
    AugmentConfig aug;
    aug.crop = 24;
    for (int trial = 0; trial < 20; ++trial) {
        const PairTransform tf = draw_transform(40, 50, aug, rng);
        const Image a = apply_transform(coords, tf);
        const Image b = apply_transform(coords, tf);
        CHECK(a.height() == 24);
        CHECK(a.width() == 24);
        CHECK(max_abs_difference(a, b) == 0.0);
    }
}

TEST_CASE("augmentation disabled gives the center crop") {
    std::mt19937_64 rng(1);
    const Image coords = coordinate_image(40, 50);
    AugmentConfig aug;
    aug.enabled = false;
    aug.crop = 20;
    const PairTransform tf = draw_transform(40, 50, aug, rng);
    const Image c = apply_transform(coords, tf);
    CHECK(max_abs_difference(c, crop(coords, 10, 15, 20, 20)) == 0.0);
}

TEST_CASE("small images are upscaled before cropping") {
    std::mt19937_64 rng(2);
    AugmentConfig aug;
    aug.crop = 64;
    for (int trial = 0; trial < 10; ++trial) {
        const PairTransform tf = draw_transform(30, 45, aug, rng);
        CHECK(std::min(tf.resized_height, tf.resized_width) >= 64);
        const Image c = apply_transform(coordinate_image(30, 45), tf);
        CHECK(c.height() == 64);
        CHECK(c.width() == 64);
    }
}

TEST_CASE("sample_batch pairs inputs with their own targets") {
    testing::TempDir dir("batch");
    for (int i = 0; i < 4; ++i) make_scene(dir.path(), std::to_string(10 + i), {{1.0, 0.08}, {1.0, 0.16}}, 32);
    Manifest m = split_scenes(build_manifest(dir.path()), 3);
    std::mt19937_64 rng(5);
    ImageCache cache;
    AugmentConfig aug;
    aug.crop = 16;
    const auto batch = sample_batch(m, Partition::Train, 2, aug, rng, cache);
    REQUIRE(batch.size() == 2);
    for (const auto& p : batch) {
        CHECK(p.night_hazy.same_shape(p.clear));
        CHECK(p.night_hazy.height() == 16);
        const SceneRecord* s = m.find(p.scene_id);
        REQUIRE(s != nullptr);
        CHECK(s->split == Partition::Train);
    }
    CHECK_THROWS_AS(sample_batch(m, Partition::Unassigned, 2, aug, rng, cache), ManifestError);
}

TEST_CASE("fixture synthesis produces two variants per scene") {
    const fs::path fixtures = fs::path(NDE_FIXTURE_DIR);
    testing::TempDir dir("synth");
    const Manifest m = synthesize_dataset(fixtures, dir.path());
    CHECK(m.scenes.size() == 8);
    CHECK(m.hazy_count() == 16);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "hazy")) files += e.is_regular_file();
    CHECK(files == 16);
    for (const auto& s : m.scenes) {
        const Image clear = load_image(m.resolve(s.clear_path));
        for (const auto& v : s.variants) {
            const Image night = load_image(m.resolve(v.path));
            CHECK(night.same_shape(clear));
            CHECK(mean_value(night) < mean_value(clear));
        }
    }
}

}
