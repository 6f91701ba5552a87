#pragma once

#include "nde/image.hpp"

#include <optional>

namespace nde {

/// Smallest transmission value used anywhere; applied before division.
inline constexpr double kTransmissionFloor = 1e-3;

/// Parameters of the atmospheric scattering model I = J*t + A*(1 - t).
///
/// Either `transmission` (1 channel, broadcast over colour) or `depth` must be
/// present. A depth map is stored normalized to [0,1] and scaled by
/// `depth_scale` (metres per unit) before t = exp(-beta * d).
struct HazeParams {
    double airlight = 1.0;
    double beta = 0.0;
    std::optional<Image> transmission;
    std::optional<Image> depth;
    double depth_scale = 1.0;
};

/// Darkening applied after haze synthesis to simulate night.
struct NightParams {
    double v_scale = 0.5;
    double gamma_dark = 2.5;

    void validate() const;
};

/// t(z) = max(exp(-beta * depth(z) * depth_scale), kTransmissionFloor).
Image transmission_from_depth(const Image& depth, double beta, double depth_scale = 1.0);

/// Resolves the transmission map for an image of the given extent, applying
/// the floor. Throws ConfigError if neither transmission nor depth is set.
Image resolve_transmission(const HazeParams& params, int height, int width);

Image synthesize_haze(const Image& clear, const HazeParams& params);

/// Exact inverse J = (I - A(1 - t)) / t. With `clamp_output` false the raw
/// inverse is returned, which may leave [0,1] for inconsistent inputs.
Image dehaze_oracle(const Image& hazy, const HazeParams& params, bool clamp_output = true);

/// rgb -> hsv, V *= v_scale, hsv -> rgb, then gamma_correct(gamma_dark).
Image darken_night(const Image& hazy, const NightParams& params);

}  // namespace nde
