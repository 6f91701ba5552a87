#include "nde/dataset.hpp"

#include "nde/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace nde {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Test: return "test";
        default: return "unassigned";
    }
}

Partition partition_from_string(const std::string& s) {
    if (s == "train") return Partition::Train;
    if (s == "test") return Partition::Test;
    if (s == "unassigned" || s.empty()) return Partition::Unassigned;
    throw ManifestError("unknown partition '" + s + "'");
}

std::size_t Manifest::hazy_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.variants.size();
    return n;
}

std::size_t Manifest::scene_count(Partition p) const {
    return static_cast<std::size_t>(
        std::count_if(scenes.begin(), scenes.end(), [p](const SceneRecord& s) { return s.split == p; }));
}

const SceneRecord* Manifest::find(const std::string& scene_id) const {
    auto it = std::lower_bound(scenes.begin(), scenes.end(), scene_id,
                               [](const SceneRecord& s, const std::string& id) { return s.scene_id < id; });
    return (it != scenes.end() && it->scene_id == scene_id) ? &*it : nullptr;
}

fs::path Manifest::resolve(const std::string& path) const {
    fs::path p(path);
    return p.is_absolute() ? p : root / p;
}

bool VariantFilter::accepts(double airlight_value, double beta_value) const {
    if (std::abs(airlight_value - airlight) > tolerance) return false;
    return std::any_of(betas.begin(), betas.end(),
                       [&](double b) { return std::abs(b - beta_value) <= tolerance; });
}

namespace {

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::optional<HazyName> parse_hazy_name(const std::string& stem) {
    const auto last = stem.rfind('_');
    if (last == std::string::npos || last == 0) return std::nullopt;
    const auto mid = stem.rfind('_', last - 1);
    if (mid == std::string::npos || mid == 0) return std::nullopt;
    HazyName name;
    name.scene_id = stem.substr(0, mid);
    if (!parse_double(stem.substr(mid + 1, last - mid - 1), name.airlight) ||
        !parse_double(stem.substr(last + 1), name.beta)) {
        return std::nullopt;
    }
    return name;
}

std::string format_hazy_name(const std::string& scene_id, double airlight, double beta) {
    return scene_id + "_" + format_double(airlight) + "_" + format_double(beta);
}

Manifest build_manifest(const fs::path& source_root, const VariantFilter& filter) {
    if (!fs::is_directory(source_root)) {
        throw IoError("source root is not a directory: " + source_root.string());
    }
    Manifest m;
    m.root = fs::absolute(source_root).lexically_normal();

    std::map<std::string, SceneRecord> by_id;
    for (const auto& p : list_images(source_root / "clear")) {
        const std::string id = p.stem().string();
        if (by_id.count(id)) {
            throw ManifestError("duplicate scene id '" + id + "' in " + (source_root / "clear").string());
        }
        SceneRecord rec;
        rec.scene_id = id;
        rec.clear_path = fs::relative(p, m.root).generic_string();
        by_id.emplace(id, std::move(rec));
    }

    for (const auto& p : list_images(source_root / "hazy")) {
        const auto name = parse_hazy_name(p.stem().string());
        if (!name) {
            m.warnings.push_back("ignoring hazy file with unrecognized name: " + p.filename().string());
            continue;
        }
        if (!filter.accepts(name->airlight, name->beta)) continue;
        auto it = by_id.find(name->scene_id);
        if (it == by_id.end()) {
            m.warnings.push_back("hazy file without clear image: " + p.filename().string());
            continue;
        }
        for (const auto& v : it->second.variants) {
            if (std::abs(v.airlight - name->airlight) <= filter.tolerance &&
                std::abs(v.beta - name->beta) <= filter.tolerance) {
                throw ManifestError("duplicate variant (A=" + format_double(name->airlight) + ", beta=" +
                                    format_double(name->beta) + ") for scene '" + name->scene_id + "'");
            }
        }
        it->second.variants.push_back({fs::relative(p, m.root).generic_string(), name->airlight, name->beta});
    }

    for (auto& [id, rec] : by_id) {
        if (rec.variants.empty()) {
            m.warnings.push_back("scene '" + id + "' has no variant matching the filter; excluded");
            continue;
        }
        std::sort(rec.variants.begin(), rec.variants.end(), [](const HazyVariant& a, const HazyVariant& b) {
            return std::tie(a.beta, a.airlight) < std::tie(b.beta, b.airlight);
        });
        m.scenes.push_back(std::move(rec));
    }
    return m;
}

std::size_t test_scene_count(std::size_t n, int train, int test) {
    if (train <= 0 || test <= 0) {
        throw SplitError("split ratio terms must be positive");
    }
    const std::size_t by_ratio = n * static_cast<std::size_t>(test) / static_cast<std::size_t>(train + test);
    return std::max<std::size_t>(by_ratio, 1);
}

Manifest split_scenes(Manifest manifest, std::uint64_t seed, int train, int test) {
    const std::size_t n = manifest.scenes.size();
    if (n < 2) {
        throw SplitError("need at least 2 scenes to split, have " + std::to_string(n));
    }
    const std::size_t n_test = test_scene_count(n, train, test);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(order[i], order[uniform_index(rng, i + 1)]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        manifest.scenes[order[k]].split = k < n_test ? Partition::Test : Partition::Train;
    }
    manifest.seed = seed;
    return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    json doc;
    doc["version"] = manifest.version;
    doc["seed"] = manifest.seed;
    doc["root"] = manifest.root.generic_string();
    json scenes = json::array();
    for (const auto& s : manifest.scenes) {
        json variants = json::array();
        for (const auto& v : s.variants) {
            variants.push_back({{"path", v.path}, {"A", v.airlight}, {"beta", v.beta}});
        }
        scenes.push_back({{"scene_id", s.scene_id},
                          {"clear", s.clear_path},
                          {"variants", std::move(variants)},
                          {"split", to_string(s.split)}});
    }
    doc["scenes"] = std::move(scenes);

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << doc.dump(2) << "\n";
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ManifestError("malformed manifest " + path.string() + ": " + e.what());
    }
    Manifest m;
    try {
        m.version = doc.at("version").get<int>();
        if (m.version != kManifestVersion) {
            throw ManifestError("unsupported manifest version " + std::to_string(m.version));
        }
        m.seed = doc.at("seed").get<std::uint64_t>();
        fs::path root = doc.value("root", std::string{});
        m.root = root.is_absolute() ? root : (path.parent_path() / root).lexically_normal();
        std::set<std::string> seen;
        for (const auto& s : doc.at("scenes")) {
            SceneRecord rec;
            rec.scene_id = s.at("scene_id").get<std::string>();
            if (!seen.insert(rec.scene_id).second) {
                throw ManifestError("duplicate scene id '" + rec.scene_id + "' in manifest");
            }
            rec.clear_path = s.at("clear").get<std::string>();
            rec.split = partition_from_string(s.value("split", std::string{"unassigned"}));
            for (const auto& v : s.at("variants")) {
                rec.variants.push_back({v.at("path").get<std::string>(), v.at("A").get<double>(),
                                        v.at("beta").get<double>()});
            }
            m.scenes.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw ManifestError("invalid manifest " + path.string() + ": " + e.what());
    }
    std::sort(m.scenes.begin(), m.scenes.end(),
              [](const SceneRecord& a, const SceneRecord& b) { return a.scene_id < b.scene_id; });
    return m;
}

// Sampling -----------------------------------------------------------------

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

PairTransform draw_transform(int height, int width, const AugmentConfig& aug, std::mt19937_64& rng) {
    if (aug.crop <= 0) throw ConfigError("crop size must be positive");
    PairTransform tf;
    tf.crop = aug.crop;
    double h = height, w = width;
    if (aug.enabled) {
        const double s = aug.scale_min + (aug.scale_max - aug.scale_min) * uniform01(rng);
        h = std::round(h * s);
        w = std::round(w * s);
    }
    if (std::min(h, w) < aug.crop) {
        const double up = aug.crop / std::min(h, w);
        h = std::max<double>(aug.crop, std::ceil(h * up - 1e-9));
        w = std::max<double>(aug.crop, std::ceil(w * up - 1e-9));
    }
    tf.resized_height = static_cast<int>(h);
    tf.resized_width = static_cast<int>(w);
    const int spare_y = tf.resized_height - aug.crop;
    const int spare_x = tf.resized_width - aug.crop;
    if (aug.enabled) {
        tf.top = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spare_y) + 1));
        tf.left = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spare_x) + 1));
    } else {
        tf.top = spare_y / 2;
        tf.left = spare_x / 2;
    }
    return tf;
}

Image apply_transform(const Image& img, const PairTransform& tf) {
    const Image& sized = (img.height() == tf.resized_height && img.width() == tf.resized_width)
                             ? img
                             : resize(img, tf.resized_height, tf.resized_width);
    return crop(sized, tf.top, tf.left, tf.crop, tf.crop);
}

const Image& ImageCache::get(const fs::path& path) {
    const std::string key = path.string();
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_.emplace(key, load_image(path)).first;
    }
    return it->second;
}

std::vector<PairRef> partition_pairs(const Manifest& manifest, Partition p) {
    std::vector<PairRef> out;
    for (std::size_t s = 0; s < manifest.scenes.size(); ++s) {
        if (manifest.scenes[s].split != p) continue;
        for (std::size_t v = 0; v < manifest.scenes[s].variants.size(); ++v) out.push_back({s, v});
    }
    return out;
}

TrainingPair load_pair(const Manifest& manifest, const PairRef& ref, ImageCache& cache) {
    const auto& scene = manifest.scenes.at(ref.scene);
    const auto& variant = scene.variants.at(ref.variant);
    TrainingPair pair;
    pair.night_hazy = cache.get(manifest.resolve(variant.path));
    pair.clear = cache.get(manifest.resolve(scene.clear_path));
    pair.scene_id = scene.scene_id;
    pair.beta = variant.beta;
    require_channels(pair.night_hazy, 3, "training input");
    require_channels(pair.clear, 3, "training target");
    if (!pair.night_hazy.same_extent(pair.clear)) {
        throw ShapeError("scene '" + scene.scene_id + "': hazy and clear extents differ");
    }
    return pair;
}

std::vector<TrainingPair> sample_batch(const Manifest& manifest, Partition partition, int batch_size,
                                       const AugmentConfig& aug, std::mt19937_64& rng, ImageCache& cache) {
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    const auto pairs = partition_pairs(manifest, partition);
    if (pairs.empty()) {
        throw ManifestError(std::string("partition '") + to_string(partition) + "' is empty");
    }
    std::vector<TrainingPair> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        TrainingPair pair = load_pair(manifest, pairs[uniform_index(rng, pairs.size())], cache);
        const PairTransform tf = draw_transform(pair.clear.height(), pair.clear.width(), aug, rng);
        pair.night_hazy = apply_transform(pair.night_hazy, tf);
        pair.clear = apply_transform(pair.clear, tf);
        batch.push_back(std::move(pair));
    }
    return batch;
}

}  // namespace nde
