#include "nde/haze.hpp"

#include "nde/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nde {

void NightParams::validate() const {
    if (!(v_scale > 0.0 && v_scale <= 1.0)) {
        throw DomainError("v_scale must lie in (0,1]");
    }
    if (!(gamma_dark >= 1.0) || !std::isfinite(gamma_dark)) {
        throw DomainError("gamma_dark must be >= 1");
    }
}

Image transmission_from_depth(const Image& depth, double beta, double depth_scale) {
    require_channels(depth, 1, "transmission_from_depth");
    if (!(beta >= 0.0) || !(depth_scale > 0.0)) {
        throw DomainError("beta must be >= 0 and depth_scale > 0");
    }
    Image t(depth.height(), depth.width(), 1);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double d = std::max(depth.data()[i], 0.0) * depth_scale;
        t.data()[i] = std::max(std::exp(-beta * d), kTransmissionFloor);
    }
    return t;
}

Image resolve_transmission(const HazeParams& params, int height, int width) {
    Image t;
    if (params.transmission) {
        require_channels(*params.transmission, 1, "transmission map");
        t = *params.transmission;
        for (double& v : t.data()) {
            v = std::clamp(v, kTransmissionFloor, 1.0);
        }
    } else if (params.depth) {
        t = transmission_from_depth(*params.depth, params.beta, params.depth_scale);
    } else {
        throw ConfigError("haze parameters need a transmission map or a depth map");
    }
    if (t.height() != height || t.width() != width) {
        throw ShapeError("transmission extent " + t.shape_string() + " does not match image " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    return t;
}

Image synthesize_haze(const Image& clear, const HazeParams& params) {
    const Image t = resolve_transmission(params, clear.height(), clear.width());
    const double a = params.airlight;
    const int c = clear.channels();
    Image out(clear.height(), clear.width(), c);
    for (std::size_t p = 0; p < clear.pixel_count(); ++p) {
        const double tp = t.data()[p];
        for (int k = 0; k < c; ++k) {
            out.data()[p * c + k] = clear.data()[p * c + k] * tp + a * (1.0 - tp);
        }
    }
    return out.clamp();
}

Image dehaze_oracle(const Image& hazy, const HazeParams& params, bool clamp_output) {
    const Image t = resolve_transmission(params, hazy.height(), hazy.width());
    const double a = params.airlight;
    const int c = hazy.channels();
    Image out(hazy.height(), hazy.width(), c);
    for (std::size_t p = 0; p < hazy.pixel_count(); ++p) {
        const double tp = t.data()[p];
        for (int k = 0; k < c; ++k) {
            out.data()[p * c + k] = (hazy.data()[p * c + k] - a * (1.0 - tp)) / tp;
        }
    }
    if (clamp_output) out.clamp();
    return out;
}

Image darken_night(const Image& hazy, const NightParams& params) {
    params.validate();
    require_channels(hazy, 3, "darken_night");
    Image hsv = rgb_to_hsv(hazy);
    for (std::size_t p = 0; p < hsv.pixel_count(); ++p) {
        hsv.data()[3 * p + 2] *= params.v_scale;
    }
    return gamma_correct(hsv_to_rgb(hsv), params.gamma_dark);
}

}  // namespace nde
