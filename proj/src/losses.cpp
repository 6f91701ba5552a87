#include "nde/losses.hpp"

#include "nde/errors.hpp"
#include "nde/tensor.hpp"

namespace nde {

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) {
        throw ShapeError(std::string(what) + ": tensor shapes differ");
    }
}

}  // namespace

torch::Tensor smooth_abs(const torch::Tensor& x, double delta) {
    const auto ax = x.abs();
    const auto inner = 2.0 * x * x / delta - ax * ax * ax / (delta * delta);
    return torch::where(ax < delta, inner, ax);
}

torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b) {
    return smooth_abs(a - b).mean();
}

torch::Tensor loss_decom(const torch::Tensor& r_night, const torch::Tensor& i_night, const torch::Tensor& r_day,
                         const torch::Tensor& i_day, const torch::Tensor& s_night, const torch::Tensor& s_day,
                         const DecompLossWeights& w) {
    require_same(r_night, r_day, "loss_decom reflectances");
    require_same(i_night, i_day, "loss_decom illuminations");
    require_same(s_night, s_day, "loss_decom images");
    require_same(r_night, s_night, "loss_decom reflectance vs image");
    return w.dd * l1_mean(recompose(i_day, r_day), s_day) + w.nn * l1_mean(recompose(i_night, r_night), s_night) +
           w.nd * l1_mean(recompose(i_day, r_night), s_day) + w.dn * l1_mean(recompose(i_night, r_day), s_night);
}

torch::Tensor loss_reflectance_similarity(const torch::Tensor& r_night, const torch::Tensor& r_day) {
    require_same(r_night, r_day, "loss_reflectance_similarity");
    return l1_mean(r_night, r_day);
}

SpatialGradient forward_differences(const torch::Tensor& x) {
    if (x.dim() != 4) throw ShapeError("forward_differences expects [B,C,H,W]");
    const int64_t h = x.size(2), w = x.size(3);
    SpatialGradient g;
    g.dx = torch::zeros_like(x);
    g.dy = torch::zeros_like(x);
    if (w > 1) {
        g.dx = torch::cat({x.slice(3, 1, w) - x.slice(3, 0, w - 1), torch::zeros_like(x.slice(3, 0, 1))}, 3);
    }
    if (h > 1) {
        g.dy = torch::cat({x.slice(2, 1, h) - x.slice(2, 0, h - 1), torch::zeros_like(x.slice(2, 0, 1))}, 2);
    }
    return g;
}

torch::Tensor structure_weight(const torch::Tensor& reflectance_gradient_magnitude, double lambda_s) {
    return torch::exp(-lambda_s * reflectance_gradient_magnitude);
}

torch::Tensor loss_illumination_smoothness(const std::vector<std::pair<torch::Tensor, torch::Tensor>>& pairs,
                                           double lambda_s) {
    if (pairs.empty()) throw ShapeError("loss_illumination_smoothness needs at least one pair");
    torch::Tensor total;
    for (const auto& [illumination, reflectance] : pairs) {
        if (illumination.dim() != 4 || illumination.size(1) != 1 || reflectance.dim() != 4 ||
            illumination.size(0) != reflectance.size(0) || illumination.size(2) != reflectance.size(2) ||
            illumination.size(3) != reflectance.size(3)) {
            throw ShapeError("loss_illumination_smoothness: illumination/reflectance mismatch");
        }
        const auto gi = forward_differences(illumination);
        const auto gr = forward_differences(reflectance);
        const auto rx = smooth_abs(gr.dx).mean(1, /*keepdim=*/true);
        const auto ry = smooth_abs(gr.dy).mean(1, /*keepdim=*/true);
        auto term = (smooth_abs(gi.dx) * structure_weight(rx, lambda_s)).mean() +
                    (smooth_abs(gi.dy) * structure_weight(ry, lambda_s)).mean();
        total = total.defined() ? total + term : term;
    }
    return total;
}

DecompLossTerms decomposition_objective(const torch::Tensor& r_night, const torch::Tensor& i_night,
                                        const torch::Tensor& r_day, const torch::Tensor& i_day,
                                        const torch::Tensor& s_night, const torch::Tensor& s_day,
                                        const DecompLossWeights& w) {
    DecompLossTerms t;
    t.decom = loss_decom(r_night, i_night, r_day, i_day, s_night, s_day, w);
    t.reflectance_similarity = loss_reflectance_similarity(r_night, r_day);
    t.illumination_smoothness = loss_illumination_smoothness({{i_day, r_day}, {i_night, r_night}}, w.smooth);
    t.total = t.decom + t.reflectance_similarity + t.illumination_smoothness;
    return t;
}

torch::Tensor loss_mse(const torch::Tensor& s_out, const torch::Tensor& s_day, const torch::Tensor& i_out,
                       const torch::Tensor& i_day, const torch::Tensor& r_out, const torch::Tensor& r_day,
                       const ReconLossWeights& w) {
    require_same(s_out, s_day, "loss_mse image");
    require_same(i_out, i_day, "loss_mse illumination");
    require_same(r_out, r_day, "loss_mse reflectance");
    const auto mse = [](const torch::Tensor& a, const torch::Tensor& b) { return (a - b.detach()).pow(2).mean(); };
    return w.image * mse(s_out, s_day) + w.illumination * mse(i_out, i_day) + w.reflectance * mse(r_out, r_day);
}

torch::Tensor loss_vgg(const torch::Tensor& s_out, const torch::Tensor& s_day, FeatureExtractor& phi,
                       const ReconLossWeights& w) {
    require_same(s_out, s_day, "loss_vgg");
    const auto fy = phi->forward(s_out);
    std::vector<torch::Tensor> fd;
    {
        torch::NoGradGuard guard;
        fd = phi->forward(s_day);
    }
    torch::Tensor total = torch::zeros({}, s_out.options());
    for (std::size_t k = 0; k < fy.size() && k < w.layer_weights.size(); ++k) {
        total = total + w.layer_weights[k] * (fy[k] - fd[k]).pow(2).mean();
    }
    return w.perceptual * total;
}

ReconLossTerms loss_reconstruction_total(const torch::Tensor& s_out, const torch::Tensor& s_day,
                                         const torch::Tensor& i_out, const torch::Tensor& i_day,
                                         const torch::Tensor& r_out, const torch::Tensor& r_day,
                                         FeatureExtractor& phi, const ReconLossWeights& w) {
    ReconLossTerms t;
    t.mse = loss_mse(s_out, s_day, i_out, i_day, r_out, r_day, w);
    t.vgg = loss_vgg(s_out, s_day, phi, w);
    t.total = t.vgg + t.mse;
    return t;
}

}  // namespace nde
