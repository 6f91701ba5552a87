#include "nde/net_config.hpp"

#include "nde/errors.hpp"

#include <cmath>

namespace nde {

namespace {

void require_non_negative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(name) + " must be a finite non-negative number");
    }
}

}  // namespace

void DecompLossWeights::validate() const {
    require_non_negative(dd, "lambda_dd");
    require_non_negative(nn, "lambda_nn");
    require_non_negative(nd, "lambda_nd");
    require_non_negative(dn, "lambda_dn");
    require_non_negative(smooth, "lambda_smooth");
}

void ReconLossWeights::validate() const {
    require_non_negative(image, "lambda_recon_s");
    require_non_negative(illumination, "lambda_recon_i");
    require_non_negative(reflectance, "lambda_recon_r");
    require_non_negative(perceptual, "lambda_phi");
    for (double w : layer_weights) require_non_negative(w, "layer_weights");
}

void DecompNetConfig::validate() const {
    if (base_channels <= 0) throw ConfigError("unet base_channels must be positive");
    if (depth < 1 || depth > 6) throw ConfigError("unet depth must be in [1,6]");
}

void EnhanceNetConfig::validate() const {
    if (num_layers < 3) throw ConfigError("enhancement net needs at least 3 layers");
    if (hidden_channels <= 0) throw ConfigError("enhancement hidden_channels must be positive");
    if (kernel <= 0 || kernel % 2 == 0) throw ConfigError("enhancement kernel must be odd");
}

int DehazeNetConfig::dense_block_input_channels(int block) const {
    return block == 0 ? stem_channels : transition_output_channels(block - 1);
}

int DehazeNetConfig::dense_layer_input_channels(int block, int k) const {
    return dense_block_input_channels(block) + (k - 1) * growth_rate;
}

int DehazeNetConfig::dense_block_output_channels(int block) const {
    return dense_block_input_channels(block) + layers_per_block[block] * growth_rate;
}

int DehazeNetConfig::transition_output_channels(int block) const {
    return dense_block_output_channels(block) / 2;
}

std::array<int, 5> DehazeNetConfig::decoder_channels() const {
    const int top = transition_output_channels(2) / 2;
    return {top, top / 2, top / 4, top / 8, top / 16};
}

int DehazeNetConfig::pyramid_output_channels(int trunk_channels) const {
    return trunk_channels + static_cast<int>(pooling_fractions.size()) * pyramid_branch_channels;
}

void DehazeNetConfig::validate() const {
    for (int n : layers_per_block) {
        if (n <= 0) throw ConfigError("dense blocks need at least one layer");
    }
    if (growth_rate <= 0 || stem_channels <= 0 || bottleneck_factor <= 0) {
        throw ConfigError("dehaze widths must be positive");
    }
    for (double f : pooling_fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("pooling fractions must lie in (0,1]");
    }
    if (pyramid_branch_channels <= 0 || refine_channels <= 0) {
        throw ConfigError("pyramid widths must be positive");
    }
    if (decoder_channels()[4] <= 0) throw ConfigError("dehaze decoder narrows below one channel");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
}

void FeatureExtractorConfig::validate() const {
    for (int c : stage_channels) {
        if (c <= 0) throw ConfigError("feature extractor widths must be positive");
    }
    for (int n : convs_per_stage) {
        if (n <= 0) throw ConfigError("feature extractor stages need at least one conv");
    }
}

}  // namespace nde
