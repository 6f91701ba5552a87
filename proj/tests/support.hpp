#pragma once

#include "nde/image.hpp"

#include <torch/torch.h>

// torch's logging macros collide with the doctest assertion names.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LE
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_GT
#include "doctest.h"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline nde::Image random_image(std::mt19937_64& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    nde::Image img(h, w, c);
    for (auto& v : img.data()) v = u(rng);
    return img;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("nde_test_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

/// ||a - n|| / max(||a||, ||n||, tiny) between the autograd gradient and a
/// central finite difference, worst case over all inputs.
inline double gradient_check(const std::function<torch::Tensor(const std::vector<torch::Tensor>&)>& f,
                             std::vector<torch::Tensor> inputs, double h = 1e-6) {
    for (auto& x : inputs) x = x.detach().clone().to(torch::kFloat64).set_requires_grad(true);
    auto out = f(inputs);
    auto grads = torch::autograd::grad({out}, inputs, {}, false, false, true);
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        torch::NoGradGuard guard;
        auto analytic = grads[i].defined() ? grads[i] : torch::zeros_like(inputs[i]);
        auto numeric = torch::zeros_like(inputs[i]);
        auto flat = inputs[i].view({-1});
        auto nflat = numeric.view({-1});
        for (int64_t k = 0; k < flat.numel(); ++k) {
            const double orig = flat[k].item<double>();
            flat[k] = orig + h;
            const double fp = f(inputs).item<double>();
            flat[k] = orig - h;
            const double fm = f(inputs).item<double>();
            flat[k] = orig;
            nflat[k] = (fp - fm) / (2 * h);
        }
        const double denom = std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), 1e-12});
        worst = std::max(worst, (analytic - numeric).norm().item<double>() / denom);
    }
    return worst;
}

}  // namespace testing
