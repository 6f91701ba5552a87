#include "nde/retinex.hpp"

#include "nde/errors.hpp"

namespace nde {

Image recompose(const Image& illumination, const Image& reflectance) {
    require_channels(illumination, 1, "recompose illumination");
    require_channels(reflectance, 3, "recompose reflectance");
    if (!illumination.same_extent(reflectance)) {
        throw ShapeError("recompose: illumination " + illumination.shape_string() + " vs reflectance " +
                         reflectance.shape_string());
    }
    Image out(reflectance.height(), reflectance.width(), 3);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        const double i = illumination.data()[p];
        for (int c = 0; c < 3; ++c) out.data()[3 * p + c] = i * reflectance.data()[3 * p + c];
    }
    return out.clamp();
}

}  // namespace nde
