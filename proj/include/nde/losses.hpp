#pragma once

#include "nde/net_config.hpp"
#include "nde/networks.hpp"

#include <torch/torch.h>

#include <vector>

namespace nde {

/// Half-width of the smoothed region of smooth_abs.
inline constexpr double kSmoothAbsDelta = 1e-6;

/// |x| outside (-delta, delta); inside, the C1 cubic 2x^2/delta - |x|^3/delta^2,
/// which is 0 at 0 and meets |x| with matching slope at |x| = delta. Keeps
/// L1 terms differentiable at their kink without changing any value outside
/// the band.
torch::Tensor smooth_abs(const torch::Tensor& x, double delta = kSmoothAbsDelta);

/// Mean of smooth_abs(a - b) over every element.
torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b);

// Decomposition stage ----------------------------------------------------------------
// Illuminations are [B,1,H,W]; reflectances and images [B,3,H,W].

/// Cross-reconstruction loss: sum over i,j in {D,N} of
/// w_ij * mean|R_i o I_j - S_j|.
torch::Tensor loss_decom(const torch::Tensor& r_night, const torch::Tensor& i_night, const torch::Tensor& r_day,
                         const torch::Tensor& i_day, const torch::Tensor& s_night, const torch::Tensor& s_day,
                         const DecompLossWeights& w);

/// mean|R_N - R_D|.
torch::Tensor loss_reflectance_similarity(const torch::Tensor& r_night, const torch::Tensor& r_day);

/// Forward differences along x and y, replicate-padded at the far edge
/// (so the last column / row is zero).
struct SpatialGradient {
    torch::Tensor dx;
    torch::Tensor dy;
};
SpatialGradient forward_differences(const torch::Tensor& x);

/// Sum over the given (illumination, reflectance) pairs of
///   mean(|dI/dx| * exp(-lambda_s * g_x(R))) + mean(|dI/dy| * exp(-lambda_s * g_y(R)))
/// where g(R) is the channel mean of the absolute reflectance differences.
torch::Tensor loss_illumination_smoothness(const std::vector<std::pair<torch::Tensor, torch::Tensor>>& pairs,
                                           double lambda_s);

/// Per-pixel weight exp(-lambda_s * g) applied to illumination gradients.
torch::Tensor structure_weight(const torch::Tensor& reflectance_gradient_magnitude, double lambda_s);

struct DecompLossTerms {
    torch::Tensor decom;
    torch::Tensor reflectance_similarity;
    torch::Tensor illumination_smoothness;
    torch::Tensor total;  // unit-weighted sum of the three
};

DecompLossTerms decomposition_objective(const torch::Tensor& r_night, const torch::Tensor& i_night,
                                        const torch::Tensor& r_day, const torch::Tensor& i_day,
                                        const torch::Tensor& s_night, const torch::Tensor& s_day,
                                        const DecompLossWeights& w);

// Reconstruction stage ------------------------------------------------------------------

/// w_S*MSE(S_Y,S_D) + w_I*MSE(I_Y,I_D) + w_R*MSE(R_Y,R_D). The *_D targets
/// are detached.
torch::Tensor loss_mse(const torch::Tensor& s_out, const torch::Tensor& s_day, const torch::Tensor& i_out,
                       const torch::Tensor& i_day, const torch::Tensor& r_out, const torch::Tensor& r_day,
                       const ReconLossWeights& w);

/// lambda_phi * sum_k w_k * mean((phi_k(S_Y) - phi_k(S_D))^2) over the four
/// feature taps.
torch::Tensor loss_vgg(const torch::Tensor& s_out, const torch::Tensor& s_day, FeatureExtractor& phi,
                       const ReconLossWeights& w);

struct ReconLossTerms {
    torch::Tensor mse;
    torch::Tensor vgg;
    torch::Tensor total;  // mse + vgg
};

ReconLossTerms loss_reconstruction_total(const torch::Tensor& s_out, const torch::Tensor& s_day,
                                         const torch::Tensor& i_out, const torch::Tensor& i_day,
                                         const torch::Tensor& r_out, const torch::Tensor& r_day,
                                         FeatureExtractor& phi, const ReconLossWeights& w);

}  // namespace nde
