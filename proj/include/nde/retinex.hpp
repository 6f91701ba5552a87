#pragma once

#include "nde/image.hpp"

namespace nde {

/// Retinex decomposition S = I o R of one image.
struct RetinexPair {
    Image illumination;  // 1 channel
    Image reflectance;   // 3 channels
};

/// S = I o R with the illumination broadcast over the reflectance channels.
Image recompose(const Image& illumination, const Image& reflectance);
inline Image recompose(const RetinexPair& pair) { return recompose(pair.illumination, pair.reflectance); }

}  // namespace nde
