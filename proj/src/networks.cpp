#include "nde/networks.hpp"

#include "nde/errors.hpp"
#include "nde/tensor.hpp"

#include <cmath>

namespace nde {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::Conv2d conv(int in, int out, int k, int stride = 1, bool bias = true) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(bias));
}

nn::Sequential double_conv(int in, int out, bool batch_norm = false) {
    if (!batch_norm) return nn::Sequential(conv(in, out, 3), nn::ReLU(), conv(out, out, 3), nn::ReLU());
    return nn::Sequential(conv(in, out, 3, 1, false), nn::BatchNorm2d(out), nn::ReLU(), conv(out, out, 3, 1, false),
                          nn::BatchNorm2d(out), nn::ReLU());
}

// Glorot-uniform weights and zero biases for every convolution below `root`.
void xavier_init(nn::Module& root) {
    torch::NoGradGuard guard;
    for (auto& m : root.modules(/*include_self=*/false)) {
        if (auto* c = m->as<nn::Conv2d>()) {
            nn::init::xavier_uniform_(c->weight);
            if (c->bias.defined()) c->bias.zero_();
        } else if (auto* t = m->as<nn::ConvTranspose2d>()) {
            nn::init::xavier_uniform_(t->weight);
            if (t->bias.defined()) t->bias.zero_();
        }
    }
}

}  // namespace

int64_t parameter_count(nn::Module& module) {
    int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

// Decomposition ---------------------------------------------------------------

DecompNetImpl::DecompNetImpl(DecompNetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    down_ = register_module("down", nn::ModuleList());
    up_ = register_module("up", nn::ModuleList());
    up_blocks_ = register_module("up_blocks", nn::ModuleList());

    int in = 3;
    for (int level = 0; level < cfg_.depth; ++level) {
        const int ch = cfg_.base_channels << level;
        down_->push_back(double_conv(in, ch, cfg_.batch_norm));
        in = ch;
    }
    const int bottom_ch = cfg_.base_channels << cfg_.depth;
    bottom_ = register_module("bottom", double_conv(in, bottom_ch, cfg_.batch_norm));
    for (int level = cfg_.depth - 1; level >= 0; --level) {
        const int ch = cfg_.base_channels << level;
        up_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(ch * 2, ch, 2).stride(2)));
        up_blocks_->push_back(double_conv(ch * 2, ch, cfg_.batch_norm));
    }
    head_illumination_ = register_module("head_illumination", conv(cfg_.base_channels, 1, 1));
    head_reflectance_ = register_module("head_reflectance", conv(cfg_.base_channels, 3, 1));
    xavier_init(*this);
}

std::pair<torch::Tensor, torch::Tensor> DecompNetImpl::forward(const torch::Tensor& rgb) {
    if (rgb.dim() != 4 || rgb.size(1) != 3) {
        throw ShapeError("decomposition expects [B,3,H,W] input");
    }
    const int64_t h = rgb.size(2), w = rgb.size(3);
    torch::Tensor x = pad_to_multiple(rgb, cfg_.multiple());

    std::vector<torch::Tensor> skips;
    for (const auto& block : *down_) {
        x = block->as<nn::Sequential>()->forward(x);
        skips.push_back(x);
        x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    }
    x = bottom_->forward(x);
    for (std::size_t i = 0; i < up_->size(); ++i) {
        x = up_[i]->as<nn::ConvTranspose2d>()->forward(x);
        x = torch::cat({x, skips[skips.size() - 1 - i]}, 1);
        x = up_blocks_[i]->as<nn::Sequential>()->forward(x);
    }
    auto illumination = torch::sigmoid(head_illumination_->forward(x));
    auto reflectance = torch::sigmoid(head_reflectance_->forward(x));
    return {crop_to(illumination, h, w), crop_to(reflectance, h, w)};
}

// Illumination enhancement -------------------------------------------------------

EnhanceNetImpl::EnhanceNetImpl(EnhanceNetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    input_ = register_module("input", conv(4, cfg_.hidden_channels, cfg_.kernel));
    residual_ = register_module("residual", nn::ModuleList());
    for (int i = 0; i < cfg_.num_layers - 2; ++i) {
        residual_->push_back(conv(cfg_.hidden_channels, cfg_.hidden_channels, cfg_.kernel));
    }
    head_ = register_module("head", conv(cfg_.hidden_channels, 1, cfg_.kernel));
}

int EnhanceNetImpl::conv_layer_count() const {
    return 2 + static_cast<int>(residual_->size());
}

torch::Tensor EnhanceNetImpl::concat_inputs(const torch::Tensor& illumination,
                                            const torch::Tensor& reflectance) const {
    if (illumination.dim() != 4 || reflectance.dim() != 4 || illumination.size(1) != 1 ||
        reflectance.size(1) != 3) {
        throw ShapeError("enhancement expects [B,1,H,W] illumination and [B,3,H,W] reflectance");
    }
    if (illumination.size(0) != reflectance.size(0) || illumination.size(2) != reflectance.size(2) ||
        illumination.size(3) != reflectance.size(3)) {
        throw ShapeError("enhancement inputs are not spatially aligned");
    }
    return torch::cat({illumination, reflectance}, 1);
}

torch::Tensor EnhanceNetImpl::input_projection(const torch::Tensor& illumination,
                                               const torch::Tensor& reflectance) {
    return torch::relu(input_->forward(concat_inputs(illumination, reflectance)));
}

torch::Tensor EnhanceNetImpl::features(const torch::Tensor& illumination, const torch::Tensor& reflectance) {
    torch::Tensor x = input_projection(illumination, reflectance);
    for (const auto& layer : *residual_) {
        x = x + torch::relu(layer->as<nn::Conv2d>()->forward(x));
    }
    return x;
}

torch::Tensor EnhanceNetImpl::forward(const torch::Tensor& illumination, const torch::Tensor& reflectance) {
    return torch::sigmoid(head_->forward(features(illumination, reflectance)));
}

// Reflectance dehazing -------------------------------------------------------------

DenseLayerImpl::DenseLayerImpl(int in_channels, int growth, int bottleneck_factor) : in_channels_(in_channels) {
    const int inner = bottleneck_factor * growth;
    body_ = register_module(
        "body", nn::Sequential(nn::BatchNorm2d(in_channels), nn::ReLU(), conv(in_channels, inner, 1, 1, false),
                               nn::BatchNorm2d(inner), nn::ReLU(), conv(inner, growth, 3, 1, false)));
}

torch::Tensor DenseLayerImpl::forward(const torch::Tensor& x) {
    if (x.size(1) != in_channels_) {
        throw ShapeError("dense layer expected " + std::to_string(in_channels_) + " channels");
    }
    return torch::cat({x, body_->forward(x)}, 1);
}

DenseBlockImpl::DenseBlockImpl(int in_channels, int layers, int growth, int bottleneck_factor) {
    int ch = in_channels;
    for (int k = 0; k < layers; ++k) {
        layers_.push_back(register_module("layer" + std::to_string(k + 1), DenseLayer(ch, growth, bottleneck_factor)));
        ch += growth;
    }
    out_channels_ = ch;
}

torch::Tensor DenseBlockImpl::forward(torch::Tensor x) {
    for (auto& layer : layers_) x = layer->forward(x);
    return x;
}

BottleneckBlockImpl::BottleneckBlockImpl(int in_channels, int out_channels, double dropout) {
    const int inner = 4 * out_channels;
    body_ = register_module(
        "body", nn::Sequential(nn::BatchNorm2d(in_channels), conv(in_channels, inner, 1, 1, false), nn::ReLU(),
                               nn::Dropout(dropout), nn::BatchNorm2d(inner), conv(inner, out_channels, 3, 1, false),
                               nn::ReLU(), nn::Dropout(dropout)));
}

torch::Tensor BottleneckBlockImpl::forward(const torch::Tensor& x) {
    return torch::cat({x, body_->forward(x)}, 1);
}

TransitionUpImpl::TransitionUpImpl(int in_channels, int out_channels, double dropout) {
    body_ = register_module("body", nn::Sequential(nn::BatchNorm2d(in_channels),
                                                   conv(in_channels, out_channels, 1, 1, false), nn::ReLU(),
                                                   nn::Dropout(dropout)));
}

torch::Tensor TransitionUpImpl::forward(const torch::Tensor& x) {
    return F::interpolate(body_->forward(x),
                          F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
}

PyramidPoolImpl::PyramidPoolImpl(int trunk_channels, std::vector<double> fractions, int branch_channels)
    : trunk_channels_(trunk_channels), branch_channels_(branch_channels), fractions_(std::move(fractions)) {
    branches_ = register_module("branches", nn::ModuleList());
    for (std::size_t i = 0; i < fractions_.size(); ++i) {
        branches_->push_back(conv(trunk_channels, branch_channels, 1));
    }
}

std::pair<int64_t, int64_t> PyramidPoolImpl::pooled_size(int64_t height, int64_t width, double fraction) {
    const auto scale = [fraction](int64_t n) {
        return std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<double>(n) * fraction + 1e-9)));
    };
    return {scale(height), scale(width)};
}

int PyramidPoolImpl::out_channels() const {
    return trunk_channels_ + static_cast<int>(fractions_.size()) * branch_channels_;
}

torch::Tensor PyramidPoolImpl::forward(const torch::Tensor& trunk) {
    if (trunk.size(1) != trunk_channels_) throw ShapeError("pyramid pool channel mismatch");
    const int64_t h = trunk.size(2), w = trunk.size(3);
    std::vector<torch::Tensor> parts;
    for (std::size_t i = 0; i < fractions_.size(); ++i) {
        const auto [ph, pw] = pooled_size(h, w, fractions_[i]);
        auto pooled = F::adaptive_avg_pool2d(trunk, F::AdaptiveAvgPool2dFuncOptions({ph, pw}));
        auto branch = torch::relu(branches_[i]->as<nn::Conv2d>()->forward(pooled));
        parts.push_back(F::interpolate(branch, F::InterpolateFuncOptions()
                                                   .size(std::vector<int64_t>{h, w})
                                                   .mode(torch::kBilinear)
                                                   .align_corners(false)));
    }
    parts.push_back(trunk);
    return torch::cat(parts, 1);
}

DehazeNetImpl::DehazeNetImpl(DehazeNetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    encoder_ = register_module("encoder", std::make_shared<nn::Module>());

    stem_ = encoder_->register_module(
        "stem", nn::Sequential(conv(3, cfg_.stem_channels, 7, 2, false), nn::BatchNorm2d(cfg_.stem_channels),
                               nn::ReLU(), nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1))));
    for (int b = 0; b < 3; ++b) {
        const int in = cfg_.dense_block_input_channels(b);
        blocks_.push_back(encoder_->register_module(
            "block" + std::to_string(b + 1),
            DenseBlock(in, cfg_.layers_per_block[b], cfg_.growth_rate, cfg_.bottleneck_factor)));
        const int out = blocks_.back()->out_channels();
        transitions_.push_back(encoder_->register_module(
            "transition" + std::to_string(b + 1),
            nn::Sequential(nn::BatchNorm2d(out), nn::ReLU(), conv(out, cfg_.transition_output_channels(b), 1, 1, false),
                           nn::AvgPool2d(nn::AvgPool2dOptions(2).stride(2)))));
    }

    // Decoder inputs: trunk, then trunk + skip from transition 2, trunk + skip
    // from transition 1, then plain trunks.
    const auto dec = cfg_.decoder_channels();
    int in = cfg_.transition_output_channels(2);
    for (int i = 0; i < 5; ++i) {
        if (i == 1) in += cfg_.transition_output_channels(1);
        if (i == 2) in += cfg_.transition_output_channels(0);
        dec_blocks_.push_back(register_module("dec_block" + std::to_string(i + 1),
                                              BottleneckBlock(in, dec[i], cfg_.dropout)));
        dec_ups_.push_back(register_module("dec_up" + std::to_string(i + 1),
                                           TransitionUp(in + dec[i], dec[i], cfg_.dropout)));
        in = dec[i];
    }
    refine_ = register_module("refine", conv(dec[4] + 3, cfg_.refine_channels, 3));
    pyramid_ = register_module(
        "pyramid", PyramidPool(cfg_.refine_channels,
                               std::vector<double>(cfg_.pooling_fractions.begin(), cfg_.pooling_fractions.end()),
                               cfg_.pyramid_branch_channels));
    head_ = register_module("head", conv(pyramid_->out_channels(), 3, 3));
}

torch::Tensor DehazeNetImpl::forward(const torch::Tensor& reflectance) {
    if (reflectance.dim() != 4 || reflectance.size(1) != 3) {
        throw ShapeError("dehazing expects [B,3,H,W] input");
    }
    const int64_t h = reflectance.size(2), w = reflectance.size(3);
    const torch::Tensor input = pad_to_multiple(reflectance, DehazeNetConfig::kDownsample);

    torch::Tensor x = stem_->forward(input);
    std::array<torch::Tensor, 3> enc;
    for (int b = 0; b < 3; ++b) {
        x = transitions_[b]->forward(blocks_[b]->forward(x));
        enc[b] = x;
    }
    for (int i = 0; i < 5; ++i) {
        if (i == 1) x = torch::cat({x, enc[1]}, 1);
        if (i == 2) x = torch::cat({x, enc[0]}, 1);
        x = dec_ups_[i]->forward(dec_blocks_[i]->forward(x));
    }
    x = torch::relu(refine_->forward(torch::cat({x, input}, 1)));
    x = pyramid_->forward(x);
    return crop_to(torch::sigmoid(head_->forward(x)), h, w);
}

// Perceptual features -----------------------------------------------------------------

FeatureExtractorImpl::FeatureExtractorImpl(FeatureExtractorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg_.seed);
    int in = 3;
    for (int s = 0; s < 4; ++s) {
        nn::Sequential stage;
        if (s > 0) {
            stage->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2).ceil_mode(true)));
        }
        for (int k = 0; k < cfg_.convs_per_stage[s]; ++k) {
            auto c = conv(in, cfg_.stage_channels[s], 3);
            torch::NoGradGuard guard;
            const double fan_in = static_cast<double>(in) * 9.0;
            c->weight.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
            c->bias.zero_();
            stage->push_back(c);
            stage->push_back(nn::ReLU());
            in = cfg_.stage_channels[s];
        }
        stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
    }
    for (auto& p : parameters()) p.set_requires_grad(false);
    eval();
}

std::vector<torch::Tensor> FeatureExtractorImpl::forward(const torch::Tensor& rgb) {
    static const double kMean[3] = {0.485, 0.456, 0.406};
    static const double kStd[3] = {0.229, 0.224, 0.225};
    auto mean = torch::tensor({kMean[0], kMean[1], kMean[2]}, rgb.options()).view({1, 3, 1, 1});
    auto std = torch::tensor({kStd[0], kStd[1], kStd[2]}, rgb.options()).view({1, 3, 1, 1});
    torch::Tensor x = (rgb - mean) / std;
    std::vector<torch::Tensor> taps;
    for (auto& stage : stages_) {
        x = stage->forward(x);
        taps.push_back(x);
    }
    return taps;
}

}  // namespace nde
