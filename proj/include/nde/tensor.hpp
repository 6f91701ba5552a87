#pragma once

#include "nde/image.hpp"

#include <torch/torch.h>

#include <vector>

namespace nde {

/// [1, C, H, W] tensor of the given dtype.
torch::Tensor to_tensor(const Image& img, torch::Dtype dtype = torch::kFloat32);
/// Stacks same-shaped images into [B, C, H, W].
torch::Tensor to_batch(const std::vector<Image>& imgs, torch::Dtype dtype = torch::kFloat32);
/// Converts element `index` of a [B, C, H, W] (or [C, H, W]) tensor; values are clamped to [0,1].
Image to_image(const torch::Tensor& t, int64_t index = 0);

/// Reflect-pads the bottom/right edges of [B, C, H, W] up to a multiple of
/// `multiple` (replicate when the image is too small to reflect).
torch::Tensor pad_to_multiple(const torch::Tensor& x, int64_t multiple);
/// Undo of pad_to_multiple: keeps the top-left `height` x `width` window.
torch::Tensor crop_to(const torch::Tensor& x, int64_t height, int64_t width);

/// Broadcast product of a [B,1,H,W] illumination and a [B,3,H,W] reflectance.
torch::Tensor recompose(const torch::Tensor& illumination, const torch::Tensor& reflectance);

}  // namespace nde
