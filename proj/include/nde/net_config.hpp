#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace nde {

/// Weights of the decomposition-stage losses.
struct DecompLossWeights {
    double dd = 1.0;     // R_D o I_D vs S_D
    double nn = 1.0;     // R_N o I_N vs S_N
    double nd = 0.01;    // R_N o I_D vs S_D
    double dn = 0.001;   // R_D o I_N vs S_N
    double smooth = 10.0;  // structure-awareness of the illumination smoothness term

    void validate() const;
};

/// Weights of the reconstruction-stage losses.
struct ReconLossWeights {
    double image = 1.0;          // S_Y vs S_D
    double illumination = 0.01;  // I_Y vs I_D
    double reflectance = 0.05;   // R_Y vs R_D
    double perceptual = 1.0;
    std::array<double, 4> layer_weights = {8.0, 4.0, 2.0, 1.0};  // shallow to deep

    void validate() const;
};

/// U-Net mapping RGB to (illumination, reflectance).
struct DecompNetConfig {
    int base_channels = 32;
    int depth = 4;  // number of 2x down/up levels
    bool batch_norm = true;

    int multiple() const { return 1 << depth; }
    void validate() const;
};

/// Illumination enhancement CNN.
struct EnhanceNetConfig {
    int num_layers = 11;
    int hidden_channels = 32;
    int kernel = 3;

    void validate() const;
};

/// Reflectance dehazing encoder-decoder.
struct DehazeNetConfig {
    std::array<int, 3> layers_per_block = {6, 12, 24};
    int growth_rate = 32;
    int stem_channels = 64;
    int bottleneck_factor = 4;  // dense-layer 1x1 width = factor * growth
    std::array<double, 4> pooling_fractions = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
    int pyramid_branch_channels = 1;
    int refine_channels = 20;
    double dropout = 0.0;

    /// Total spatial reduction of the encoder (stem /4, three transitions /2).
    static constexpr int kDownsample = 32;

    /// Input channel count of layer k (1-based) in dense block `block`.
    int dense_layer_input_channels(int block, int k) const;
    /// Channels entering dense block `block` (0-based).
    int dense_block_input_channels(int block) const;
    int dense_block_output_channels(int block) const;
    /// Channels after the transition that follows dense block `block`.
    int transition_output_channels(int block) const;
    /// Output channels of each of the five decoder transition-up blocks.
    std::array<int, 5> decoder_channels() const;
    int pyramid_output_channels(int trunk_channels) const;

    void validate() const;
};

/// Fixed feature pyramid used by the perceptual loss. Defaults mirror the
/// first four stages of the 16-layer VGG configuration.
struct FeatureExtractorConfig {
    std::array<int, 4> stage_channels = {64, 128, 256, 512};
    std::array<int, 4> convs_per_stage = {2, 2, 3, 3};
    std::uint64_t seed = 0x5eed;

    void validate() const;
};

}  // namespace nde
