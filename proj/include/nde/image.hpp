#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace nde {

/// Channels-last floating-point raster with values in [0,1].
///
/// Storage is row-major `data[(y * width + x) * channels + c]`. Every public
/// operation in the toolkit returns images clamped to [0,1]; the container
/// itself does not clamp on write so intermediate arithmetic stays exact.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    Image(int height, int width, int channels, std::vector<double> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int y, int x, int c) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double operator()(int y, int x, int c) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool same_extent(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    /// True when every value is finite and inside [0,1].
    bool in_unit_range() const noexcept;
    Image& clamp() noexcept;

    std::string shape_string() const;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

void require_channels(const Image& img, int channels, const char* what);
void require_same_shape(const Image& a, const Image& b, const char* what);

/// Single channel `c` of `img` as a 1-channel image.
Image extract_channel(const Image& img, int c);
double mean_value(const Image& img);
double max_abs_difference(const Image& a, const Image& b);
double mean_abs_difference(const Image& a, const Image& b);

// Color and tone ------------------------------------------------------------

/// RGB -> HSV with all three channels in [0,1]; hue is degrees / 360.
Image rgb_to_hsv(const Image& rgb);
/// Inverse of rgb_to_hsv. Rejects H outside [0,1) or S,V outside [0,1].
Image hsv_to_rgb(const Image& hsv);
/// out = in^gamma elementwise. gamma must be positive and finite.
Image gamma_correct(const Image& img, double gamma);

// Geometry ------------------------------------------------------------------

Image crop(const Image& img, int top, int left, int height, int width);

/// Bilinear resize with corner-aligned sampling: output pixel (0,0) samples
/// input (0,0) and the last output pixel samples the last input pixel, i.e.
/// src = dst * (in - 1) / (out - 1). A 1-pixel output axis samples index 0.
Image resize(const Image& img, int height, int width);

/// Rotates by 180 degrees.
Image rotate180(const Image& img);

// File I/O (PNG / JPEG, 8-bit) ----------------------------------------------

/// 8-bit file -> [0,1] by division by 255. Gray files load as 1 channel,
/// colour files as RGB (alpha dropped).
Image load_image(const std::filesystem::path& path);
/// Quantizes with round(x * 255). Format is chosen from the extension.
void save_image(const Image& img, const std::filesystem::path& path);

}  // namespace nde
