#include "nde/tensor.hpp"

#include "nde/errors.hpp"

namespace nde {

namespace F = torch::nn::functional;

torch::Tensor to_tensor(const Image& img, torch::Dtype dtype) {
    auto t = torch::from_blob(const_cast<double*>(img.data().data()),
                              {img.height(), img.width(), img.channels()}, torch::kFloat64);
    return t.permute({2, 0, 1}).unsqueeze(0).to(dtype).contiguous();
}

torch::Tensor to_batch(const std::vector<Image>& imgs, torch::Dtype dtype) {
    if (imgs.empty()) throw ShapeError("cannot batch zero images");
    std::vector<torch::Tensor> parts;
    parts.reserve(imgs.size());
    for (const auto& img : imgs) {
        require_same_shape(img, imgs.front(), "to_batch");
        parts.push_back(to_tensor(img, dtype));
    }
    return torch::cat(parts, 0);
}

Image to_image(const torch::Tensor& t, int64_t index) {
    torch::Tensor x = t.dim() == 4 ? t[index] : t;
    if (x.dim() != 3) throw ShapeError("to_image expects [B,C,H,W] or [C,H,W]");
    x = x.detach().to(torch::kCPU, torch::kFloat64).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
    const auto h = static_cast<int>(x.size(0));
    const auto w = static_cast<int>(x.size(1));
    const auto c = static_cast<int>(x.size(2));
    const double* p = x.data_ptr<double>();
    return Image(h, w, c, std::vector<double>(p, p + x.numel()));
}

torch::Tensor pad_to_multiple(const torch::Tensor& x, int64_t multiple) {
    const int64_t h = x.size(-2), w = x.size(-1);
    const int64_t ph = (multiple - h % multiple) % multiple;
    const int64_t pw = (multiple - w % multiple) % multiple;
    if (ph == 0 && pw == 0) return x;
    const bool can_reflect = ph < h && pw < w;
    F::PadFuncOptions opts({0, pw, 0, ph});
    if (can_reflect) {
        opts.mode(torch::kReflect);
    } else {
        opts.mode(torch::kReplicate);
    }
    return F::pad(x, opts);
}

torch::Tensor crop_to(const torch::Tensor& x, int64_t height, int64_t width) {
    if (x.size(-2) == height && x.size(-1) == width) return x;
    return x.slice(-2, 0, height).slice(-1, 0, width);
}

torch::Tensor recompose(const torch::Tensor& illumination, const torch::Tensor& reflectance) {
    if (illumination.dim() != 4 || reflectance.dim() != 4 || illumination.size(1) != 1 ||
        reflectance.size(1) != 3 || illumination.size(0) != reflectance.size(0) ||
        illumination.size(2) != reflectance.size(2) || illumination.size(3) != reflectance.size(3)) {
        throw ShapeError("recompose expects [B,1,H,W] illumination and [B,3,H,W] reflectance");
    }
    return illumination * reflectance;
}

}  // namespace nde
