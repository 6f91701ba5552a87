#pragma once

#include "nde/net_config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace nde {

/// Two-stage training protocol. Defaults reproduce the full-scale protocol;
/// desk() shrinks it to minutes on a CPU.
struct TrainConfig {
    double learning_rate = 2.5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 2;
    int crop = 256;
    int epochs_stage1 = 55;
    int epochs_stage2 = 25;
    int max_steps = 0;  // > 0 caps the steps of each stage regardless of epochs
    std::uint64_t seed = 0;

    bool augment = true;
    double scale_min = 0.8;
    double scale_max = 1.2;

    int validate_every = 0;  // stage-2 validation interval in steps; 0 = once per epoch

    DecompLossWeights decomp_weights;
    ReconLossWeights recon_weights;
    DecompNetConfig decomp_net;
    EnhanceNetConfig enhance_net;
    DehazeNetConfig dehaze_net;
    FeatureExtractorConfig feature_net;

    std::string feature_weights;  // optional archive with pretrained extractor weights
    std::string encoder_weights;  // optional archive with pretrained dense-block weights

    static TrainConfig desk();

    /// Sets one key from its text form. Unknown keys raise ConfigError listing
    /// every valid key.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static std::vector<std::string> keys();

    /// Canonical `key=value` list in keys() order.
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    /// 64-bit FNV-1a over the canonical key/value text, as 16 hex digits.
    std::string hash() const;

    void validate() const;
};

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped, values may be quoted. Section headers are rejected.
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::filesystem::path& path);

/// Applies the entries of a key/value file, then the `key=value` overrides
/// (overrides win).
void apply_config(TrainConfig& cfg, const std::vector<std::pair<std::string, std::string>>& file_entries,
                  const std::vector<std::string>& overrides);

std::string fnv1a_hex(const std::string& text);

}  // namespace nde
