#pragma once

#include "nde/net_config.hpp"

#include <torch/torch.h>

#include <utility>
#include <vector>

namespace nde {

// Decomposition ---------------------------------------------------------------

/// U-Net: RGB [B,3,H,W] -> (illumination [B,1,H,W], reflectance [B,3,H,W]).
///
/// `depth` levels of two 3x3 conv + ReLU followed by 2x max-pooling, a
/// bottleneck at base * 2^depth channels, transposed-conv upsampling with
/// concatenated skips, and sigmoid heads for both outputs. Inputs whose
/// extent is not a multiple of 2^depth are reflect-padded and the outputs
/// cropped back.
class DecompNetImpl : public torch::nn::Module {
public:
    explicit DecompNetImpl(DecompNetConfig cfg = {});

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& rgb);
    const DecompNetConfig& config() const { return cfg_; }

private:
    DecompNetConfig cfg_;
    torch::nn::ModuleList down_{nullptr};
    torch::nn::Sequential bottom_{nullptr};
    torch::nn::ModuleList up_{nullptr};
    torch::nn::ModuleList up_blocks_{nullptr};
    torch::nn::Conv2d head_illumination_{nullptr};
    torch::nn::Conv2d head_reflectance_{nullptr};
};
TORCH_MODULE(DecompNet);

// Illumination enhancement -------------------------------------------------------

/// Full-resolution residual CNN: concat(I_N, R_N) -> brightened I_Y.
///
/// Layer 1 projects the 4 input channels to `hidden_channels`; layers
/// 2..num_layers-1 each add ReLU(conv(x)) to their input; the last layer maps
/// to one channel followed by a sigmoid.
class EnhanceNetImpl : public torch::nn::Module {
public:
    explicit EnhanceNetImpl(EnhanceNetConfig cfg = {});

    torch::Tensor forward(const torch::Tensor& illumination, const torch::Tensor& reflectance);
    /// Output of the first (projection) layer.
    torch::Tensor input_projection(const torch::Tensor& illumination, const torch::Tensor& reflectance);
    /// Activations entering the output head.
    torch::Tensor features(const torch::Tensor& illumination, const torch::Tensor& reflectance);

    /// Number of convolution layers actually instantiated.
    int conv_layer_count() const;
    const EnhanceNetConfig& config() const { return cfg_; }
    torch::nn::ModuleList residual_layers() const { return residual_; }

private:
    torch::Tensor concat_inputs(const torch::Tensor& illumination, const torch::Tensor& reflectance) const;

    EnhanceNetConfig cfg_;
    torch::nn::Conv2d input_{nullptr};
    torch::nn::ModuleList residual_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(EnhanceNet);

// Reflectance dehazing -------------------------------------------------------------

/// Dense layer: BN-ReLU-Conv1x1 -> BN-ReLU-Conv3x3, output concatenated to input.
class DenseLayerImpl : public torch::nn::Module {
public:
    DenseLayerImpl(int in_channels, int growth, int bottleneck_factor);
    torch::Tensor forward(const torch::Tensor& x);
    int in_channels() const { return in_channels_; }

private:
    int in_channels_;
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(DenseLayer);

class DenseBlockImpl : public torch::nn::Module {
public:
    DenseBlockImpl(int in_channels, int layers, int growth, int bottleneck_factor);
    torch::Tensor forward(torch::Tensor x);
    const std::vector<DenseLayer>& layers() const { return layers_; }
    int out_channels() const { return out_channels_; }

private:
    std::vector<DenseLayer> layers_;
    int out_channels_;
};
TORCH_MODULE(DenseBlock);

/// Decoder bottleneck: two BatchNorm-Conv-ReLU-Dropout mini-blocks (1x1 to
/// 4*out, then 3x3 to out); the result is concatenated with the input.
class BottleneckBlockImpl : public torch::nn::Module {
public:
    BottleneckBlockImpl(int in_channels, int out_channels, double dropout);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(BottleneckBlock);

/// BatchNorm-Conv1x1-ReLU-Dropout followed by 2x nearest upsampling.
class TransitionUpImpl : public torch::nn::Module {
public:
    TransitionUpImpl(int in_channels, int out_channels, double dropout);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(TransitionUp);

/// Concatenates a trunk with one branch per pooling fraction; each branch is
/// average-pooled to max(1, floor(extent * fraction)), 1x1-convolved,
/// rectified and bilinearly upsampled back to the trunk extent.
class PyramidPoolImpl : public torch::nn::Module {
public:
    PyramidPoolImpl(int trunk_channels, std::vector<double> fractions, int branch_channels);
    torch::Tensor forward(const torch::Tensor& trunk);
    static std::pair<int64_t, int64_t> pooled_size(int64_t height, int64_t width, double fraction);
    int out_channels() const;

private:
    int trunk_channels_;
    int branch_channels_;
    std::vector<double> fractions_;
    torch::nn::ModuleList branches_{nullptr};
};
TORCH_MODULE(PyramidPool);

/// Densely connected encoder-decoder mapping R_N to the dehazed R_Y.
///
/// Encoder: 7x7/2 stem + 3x3/2 max-pool, then three dense blocks each
/// followed by a halving 1x1 transition with 2x average pooling (total /32).
/// Decoder: five bottleneck + transition-up stages back to full resolution
/// with skips from the first two transitions, a refinement conv on
/// concat(features, input), pyramid pooling and a sigmoid 3x3 head.
class DehazeNetImpl : public torch::nn::Module {
public:
    explicit DehazeNetImpl(DehazeNetConfig cfg = {});

    torch::Tensor forward(const torch::Tensor& reflectance);
    const DehazeNetConfig& config() const { return cfg_; }
    /// Dense-block encoder (stem, blocks, transitions) as a named scope.
    torch::nn::Module& encoder() { return *encoder_; }
    const std::vector<DenseBlock>& dense_blocks() const { return blocks_; }
    PyramidPool pyramid() const { return pyramid_; }

private:
    DehazeNetConfig cfg_;
    std::shared_ptr<torch::nn::Module> encoder_;
    torch::nn::Sequential stem_{nullptr};
    std::vector<DenseBlock> blocks_;
    std::vector<torch::nn::Sequential> transitions_;
    std::vector<BottleneckBlock> dec_blocks_;
    std::vector<TransitionUp> dec_ups_;
    torch::nn::Conv2d refine_{nullptr};
    PyramidPool pyramid_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(DehazeNet);

// Perceptual features -----------------------------------------------------------------

/// Fixed 4-stage conv feature pyramid; forward returns the post-ReLU output of
/// each stage (shallow to deep). Weights are drawn deterministically from
/// `cfg.seed` unless loaded from an archive; all parameters are frozen.
class FeatureExtractorImpl : public torch::nn::Module {
public:
    explicit FeatureExtractorImpl(FeatureExtractorConfig cfg = {});

    std::vector<torch::Tensor> forward(const torch::Tensor& rgb);
    const FeatureExtractorConfig& config() const { return cfg_; }

private:
    FeatureExtractorConfig cfg_;
    std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(FeatureExtractor);

/// Sum of element counts of all parameters.
int64_t parameter_count(torch::nn::Module& module);

}  // namespace nde
