#pragma once

#include "nde/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nde {

inline constexpr int kManifestVersion = 1;

enum class Partition { Unassigned, Train, Test };

const char* to_string(Partition p);
Partition partition_from_string(const std::string& s);

struct HazyVariant {
    std::string path;  // relative to Manifest::root unless absolute
    double airlight = 1.0;
    double beta = 0.0;
};

struct SceneRecord {
    std::string scene_id;
    std::string clear_path;
    std::vector<HazyVariant> variants;
    Partition split = Partition::Unassigned;
};

/// Scene-level grouping of clear images with their hazy variants, plus a
/// scene-disjoint train/test assignment.
struct Manifest {
    int version = kManifestVersion;
    std::uint64_t seed = 0;
    std::filesystem::path root;
    std::vector<SceneRecord> scenes;  // sorted by scene_id
    std::vector<std::string> warnings;  // not persisted

    std::size_t hazy_count() const;
    std::size_t scene_count(Partition p) const;
    const SceneRecord* find(const std::string& scene_id) const;
    std::filesystem::path resolve(const std::string& path) const;
};

struct VariantFilter {
    double airlight = 1.0;
    std::vector<double> betas = {0.08, 0.16};
    double tolerance = 1e-9;

    bool accepts(double airlight_value, double beta_value) const;
};

/// Parsed `<scene_id>_<A>_<beta>` file stem; nullopt when it does not match.
struct HazyName {
    std::string scene_id;
    double airlight;
    double beta;
};
std::optional<HazyName> parse_hazy_name(const std::string& stem);
std::string format_hazy_name(const std::string& scene_id, double airlight, double beta);

/// Scans `<root>/clear/<id>.<ext>` and `<root>/hazy/<id>_<A>_<beta>.<ext>`.
/// Scenes without a matching variant are excluded with a warning; a repeated
/// scene id is a ManifestError. An empty or missing hazy/ folder yields no
/// variants (and therefore no scenes).
Manifest build_manifest(const std::filesystem::path& source_root, const VariantFilter& filter = {});

/// Number of test scenes for `n` scenes at train:test = `train`:`test`;
/// rounds toward train but keeps at least one test scene.
std::size_t test_scene_count(std::size_t n, int train = 3, int test = 1);

/// Deterministic scene-disjoint split. Throws SplitError for fewer than two
/// scenes or a non-positive ratio.
Manifest split_scenes(Manifest manifest, std::uint64_t seed, int train = 3, int test = 1);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

// Sampling -----------------------------------------------------------------

struct AugmentConfig {
    bool enabled = true;
    int crop = 256;
    double scale_min = 0.8;
    double scale_max = 1.2;
};

struct TrainingPair {
    Image night_hazy;  // S_N
    Image clear;       // S_D
    std::string scene_id;
    double beta = 0.0;
};

/// Geometric parameters drawn for one pair; identical for input and target.
struct PairTransform {
    int resized_height = 0;
    int resized_width = 0;
    int top = 0;
    int left = 0;
    int crop = 0;
};

/// Uniform double in [0,1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
double uniform01(std::mt19937_64& rng);
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

PairTransform draw_transform(int height, int width, const AugmentConfig& aug, std::mt19937_64& rng);
Image apply_transform(const Image& img, const PairTransform& tf);

/// Loads and caches images referenced by a manifest.
class ImageCache {
public:
    const Image& get(const std::filesystem::path& path);
    std::size_t size() const { return cache_.size(); }

private:
    std::map<std::string, Image> cache_;
};

struct PairRef {
    std::size_t scene = 0;
    std::size_t variant = 0;
};

/// Every (scene, variant) pair of a partition in manifest order.
std::vector<PairRef> partition_pairs(const Manifest& manifest, Partition p);

TrainingPair load_pair(const Manifest& manifest, const PairRef& ref, ImageCache& cache);

/// Draws `batch_size` pairs uniformly (with replacement) and applies one
/// random resize+crop per pair, shared by the input and the target.
std::vector<TrainingPair> sample_batch(const Manifest& manifest, Partition partition, int batch_size,
                                       const AugmentConfig& aug, std::mt19937_64& rng,
                                       ImageCache& cache);

}  // namespace nde
