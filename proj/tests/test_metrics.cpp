#include "support.hpp"

#include "nde/dataset.hpp"
#include "nde/errors.hpp"
#include "nde/metrics.hpp"

#include <cmath>
#include <fstream>

using namespace nde;
namespace fs = std::filesystem;

namespace {

Image with_noise(const Image& img, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    Image out = img;
    for (auto& v : out.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    return out;
}

Image quantize8(const Image& img) {
    Image out = img;
    for (auto& v : out.data()) v = std::round(v * 255.0) / 255.0;
    return out;
}

Manifest small_dataset(const fs::path& root, int scenes) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < scenes; ++i) {
        const std::string id = std::to_string(300 + i);
        save_image(testing::random_image(rng, 16, 16, 3), root / "clear" / (id + ".png"));
        save_image(testing::random_image(rng, 16, 16, 3), root / "hazy" / (format_hazy_name(id, 1.0, 0.08) + ".png"));
        save_image(testing::random_image(rng, 16, 16, 3), root / "hazy" / (format_hazy_name(id, 1.0, 0.16) + ".png"));
    }
    return split_scenes(build_manifest(root), 0);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr") {
    std::mt19937_64 rng(1);
    const Image a = testing::random_image(rng, 12, 12, 3, 0.2, 0.8);
    CHECK(std::isinf(psnr(a, a)));
    Image b = a;
    for (auto& v : b.data()) v += 0.1;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    const Image c = testing::random_image(rng, 12, 12, 3);
    double se = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) se += std::pow(a.data()[k] - c.data()[k], 2);
    const double direct = 10.0 * std::log10(1.0 / (se / a.data().size()));
    CHECK(std::abs(psnr(a, c) - direct) < 1e-9);

    CHECK(psnr(a, with_noise(a, 0.01, 2)) > psnr(a, with_noise(a, 0.05, 2)));
    CHECK(psnr(a, with_noise(a, 0.05, 2)) > psnr(a, with_noise(a, 0.2, 2)));
    CHECK_THROWS_AS(psnr(a, Image(12, 13, 3)), ShapeError);
}

TEST_CASE("ssim identity, oracle and symmetry") {
    std::mt19937_64 rng(3);
    const Image a = testing::random_image(rng, 24, 24, 3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Constant images: variances vanish, leaving C1 / (mu_a^2 + mu_b^2 + C1).
    const double v = ssim(Image(16, 16, 3, 0.0), Image(16, 16, 3, 1.0));
    CHECK(std::abs(v - 1e-4 / 1.0001) < 1e-12);

    const Image b = with_noise(a, 0.1, 4);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, with_noise(a, 0.02, 5)) > ssim(a, b));

    CHECK_THROWS_AS(ssim(Image(10, 30, 3), Image(10, 30, 3)), ShapeError);

    const auto k = gaussian_kernel(11, 1.5);
    double s = 0.0;
    for (double t : k) s += t;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k[5] > k[4]);
    CHECK(k[0] == doctest::Approx(k[10]).epsilon(1e-15));
}

TEST_CASE("cascades run left to right") {
    std::mt19937_64 rng(6);
    const Image a = testing::random_image(rng, 8, 8, 3, 0.1, 0.9);
    CHECK(max_abs_difference(run_cascade({{identity_stage()}}, a), a) == 0.0);
    CHECK_THROWS(run_cascade({{}}, a));

    const Image g = run_cascade({{gamma_stage(0.5), gamma_stage(2.0)}}, a);
    CHECK(max_abs_difference(g, a) < 1e-12);

    // Order matters for non-commuting stages.
    CascadeStage half{"half", [](const Image& x) {
                          Image y = x;
                          for (auto& v : y.data()) v *= 0.5;
                          return y;
                      }};
    const Image ab = run_cascade({{gamma_stage(2.0), half}}, a);
    const Image ba = run_cascade({{half, gamma_stage(2.0)}}, a);
    CHECK(max_abs_difference(ab, ba) > 1e-3);
    CHECK(ab(0, 0, 0) == doctest::Approx(0.5 * a(0, 0, 0) * a(0, 0, 0)));

    std::vector<double> ms;
    CascadeRunOptions opts;
    opts.stage_ms = &ms;
    run_cascade({{identity_stage(), half}}, a, opts);
    CHECK(ms.size() == 2);
}

TEST_CASE("stage parsing") {
    CascadeStage s;
    CHECK(parse_builtin_stage("identity", s));
    CHECK(parse_builtin_stage("gamma:0.5", s));
    CHECK(parse_builtin_stage("cmd:cp", s));
    CHECK_FALSE(parse_builtin_stage("ndenet:x.ckpt", s));
    CHECK_FALSE(parse_builtin_stage("bogus", s));
}

TEST_CASE("external adapters") {
    std::mt19937_64 rng(7);
    const Image a = testing::random_image(rng, 8, 8, 3);
    const Image c = run_cascade({{external_stage("cp")}}, a);
    CHECK(max_abs_difference(c, quantize8(a)) == 0.0);

    try {
        run_cascade({{identity_stage(), external_stage("false")}}, a);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == 1);
    }
    CascadeStage boom{"boom", [](const Image&) -> Image { throw std::runtime_error("boom"); }};
    try {
        run_cascade({{boom}}, a);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == 0);
    }
}

TEST_CASE("persisted intermediates") {
    testing::TempDir dir("persist");
    std::mt19937_64 rng(8);
    CascadeRunOptions opts;
    opts.persist_dir = dir.path();
    opts.persist_prefix = "x";
    run_cascade({{identity_stage(), gamma_stage(2.0)}}, testing::random_image(rng, 8, 8, 3), opts);
    CHECK(fs::exists(dir / "x_stage0.png"));
    CHECK(fs::exists(dir / "x_stage1.png"));
}

TEST_CASE("evaluation isolates failures and is order independent") {
    testing::TempDir dir("eval");
    const Manifest m = small_dataset(dir.path(), 5);
    const MetricsRecord rec = evaluate({{identity_stage()}}, m, Partition::Test);
    CHECK(rec.count == 2);
    CHECK(rec.failed == 0);
    REQUIRE(rec.images.size() == 2);
    CHECK(rec.images[0].image_id < rec.images[1].image_id);
    double mean = 0.0;
    for (const auto& i : rec.images) mean += i.ssim;
    CHECK(rec.mean_ssim == doctest::Approx(mean / 2).epsilon(1e-14));

    Manifest reversed = m;
    std::reverse(reversed.scenes.begin(), reversed.scenes.end());
    const MetricsRecord rev = evaluate({{identity_stage()}}, reversed, Partition::Test);
    CHECK(rev.mean_ssim == rec.mean_ssim);
    CHECK(rev.mean_psnr == rec.mean_psnr);

    // One image fails, the rest are still scored.
    CascadeStage picky{"picky", [&, n = 0](const Image& x) mutable -> Image {
                           if (n++ == 0) throw std::runtime_error("no");
                           return x;
                       }};
    const MetricsRecord partial = evaluate({{picky}}, m, Partition::Test);
    CHECK(partial.failed == 1);
    CHECK(partial.count == 1);
    REQUIRE(partial.images.size() == 2);

    MetricsRecord inf;
    inf.images = {{"b", 1.0, std::numeric_limits<double>::infinity(), {}, ""}, {"a", 0.5, 30.0, {}, ""}};
    inf.finalize();
    CHECK(inf.images[0].image_id == "a");
    CHECK(inf.infinite_psnr == 1);
    CHECK(inf.mean_psnr == 30.0);
    CHECK(inf.mean_ssim == 0.75);
}

TEST_CASE("metrics csv") {
    testing::TempDir dir("csv");
    MetricsRecord rec;
    rec.images = {{"1", 0.9, 25.0, {1.5, 2.0}, ""}};
    rec.finalize();
    write_metrics_csv(rec, dir / "m.csv");
    std::ifstream in(dir / "m.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "image_id,ssim,psnr,stage_timings_ms");
    CHECK(row.rfind("1,", 0) == 0);
    CHECK(row.find(';') != std::string::npos);
}

TEST_CASE("comparison grid") {
    std::mt19937_64 rng(9);
    std::vector<GridRow> rows;
    for (int r = 0; r < 3; ++r) {
        GridRow row{"row" + std::to_string(r), {}};
        for (int c = 0; c < 4; ++c) row.images.push_back(testing::random_image(rng, 10, 12, r == 1 ? 1 : 3));
        rows.push_back(row);
    }
    const Image g = emit_comparison_grid(rows);
    CHECK(g.height() == 3 * 10 + kGridLabelHeight);
    CHECK(g.width() == 4 * 12);
    CHECK(g.channels() == 3);
    CHECK(max_abs_difference(g, emit_comparison_grid(rows)) == 0.0);
    CHECK(g(kGridLabelHeight + 10 + 3, 12 + 5, 0) == doctest::Approx(rows[1].images[1](3, 5, 0)));
    CHECK(g(kGridLabelHeight + 20 + 3, 24 + 5, 2) == doctest::Approx(rows[2].images[2](3, 5, 2)));

    auto ragged = rows;
    ragged[2].images.pop_back();
    CHECK_THROWS_AS(emit_comparison_grid(ragged), LayoutError);
    auto mixed = rows;
    mixed[0].images[0] = Image(11, 12, 3);
    CHECK_THROWS_AS(emit_comparison_grid(mixed), LayoutError);
    CHECK_THROWS_AS(emit_comparison_grid({}), LayoutError);
}

}
