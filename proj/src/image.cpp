#include "nde/image.hpp"

#include "nde/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nde {

namespace {

void check_dims(int height, int width, int channels) {
    if (channels != 1 && channels != 3) {
        throw ChannelMismatchError("image channels must be 1 or 3, got " + std::to_string(channels));
    }
    if (height < 0 || width < 0) {
        throw ShapeError("negative image extent");
    }
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw ShapeError("image buffer size does not match " + shape_string());
    }
}

bool Image::in_unit_range() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

Image& Image::clamp() noexcept {
    for (double& v : data_) {
        v = std::isfinite(v) ? clamp01(v) : 0.0;
    }
    return *this;
}

std::string Image::shape_string() const {
    std::ostringstream os;
    os << height_ << "x" << width_ << "x" << channels_;
    return os.str();
}

void require_channels(const Image& img, int channels, const char* what) {
    if (img.channels() != channels) {
        throw ChannelMismatchError(std::string(what) + ": expected " + std::to_string(channels) +
                                   " channels, got " + std::to_string(img.channels()));
    }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

Image extract_channel(const Image& img, int c) {
    if (c < 0 || c >= img.channels()) {
        throw BoundsError("channel index out of range");
    }
    Image out(img.height(), img.width(), 1);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        out.data()[i] = img.data()[i * img.channels() + c];
    }
    return out;
}

double mean_value(const Image& img) {
    if (img.empty()) return 0.0;
    double sum = 0.0;
    for (double v : img.data()) sum += v;
    return sum / static_cast<double>(img.size());
}

double max_abs_difference(const Image& a, const Image& b) {
    require_same_shape(a, b, "max_abs_difference");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

double mean_abs_difference(const Image& a, const Image& b) {
    require_same_shape(a, b, "mean_abs_difference");
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a.data()[i] - b.data()[i]);
    }
    return s / static_cast<double>(a.size());
}

Image rgb_to_hsv(const Image& rgb) {
    require_channels(rgb, 3, "rgb_to_hsv");
    Image hsv(rgb.height(), rgb.width(), 3);
    auto src = rgb.data();
    auto dst = hsv.data();
    for (std::size_t p = 0; p < rgb.pixel_count(); ++p) {
        const double r = clamp01(src[3 * p]);
        const double g = clamp01(src[3 * p + 1]);
        const double b = clamp01(src[3 * p + 2]);
        const double mx = std::max({r, g, b});
        const double mn = std::min({r, g, b});
        const double delta = mx - mn;

        double h = 0.0;
        if (delta > 0.0) {
            if (mx == r) {
                h = (g - b) / delta;
                if (h < 0.0) h += 6.0;
            } else if (mx == g) {
                h = (b - r) / delta + 2.0;
            } else {
                h = (r - g) / delta + 4.0;
            }
            h /= 6.0;
            if (h >= 1.0) h -= 1.0;
        }
        dst[3 * p] = h;
        dst[3 * p + 1] = mx > 0.0 ? delta / mx : 0.0;
        dst[3 * p + 2] = mx;
    }
    return hsv;
}

Image hsv_to_rgb(const Image& hsv) {
    require_channels(hsv, 3, "hsv_to_rgb");
    Image rgb(hsv.height(), hsv.width(), 3);
    auto src = hsv.data();
    auto dst = rgb.data();
    for (std::size_t p = 0; p < hsv.pixel_count(); ++p) {
        const double h = src[3 * p];
        const double s = src[3 * p + 1];
        const double v = src[3 * p + 2];
        if (!(h >= 0.0 && h < 1.0) || !(s >= 0.0 && s <= 1.0) || !(v >= 0.0 && v <= 1.0)) {
            throw DomainError("hsv_to_rgb: channel value out of range at pixel " + std::to_string(p));
        }
        const double h6 = h * 6.0;
        const int sector = std::min(static_cast<int>(h6), 5);
        const double f = h6 - sector;
        const double pv = v * (1.0 - s);
        const double qv = v * (1.0 - s * f);
        const double tv = v * (1.0 - s * (1.0 - f));
        double r = 0, g = 0, b = 0;
        switch (sector) {
            case 0: r = v;  g = tv; b = pv; break;
            case 1: r = qv; g = v;  b = pv; break;
            case 2: r = pv; g = v;  b = tv; break;
            case 3: r = pv; g = qv; b = v;  break;
            case 4: r = tv; g = pv; b = v;  break;
            default: r = v; g = pv; b = qv; break;
        }
        dst[3 * p] = clamp01(r);
        dst[3 * p + 1] = clamp01(g);
        dst[3 * p + 2] = clamp01(b);
    }
    return rgb;
}

Image gamma_correct(const Image& img, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw DomainError("gamma must be positive and finite");
    }
    Image out = img;
    for (double& v : out.data()) {
        v = std::pow(clamp01(v), gamma);
    }
    return out;
}

Image crop(const Image& img, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || height < 0 || width < 0 || top + height > img.height() ||
        left + width > img.width()) {
        throw BoundsError("crop window (" + std::to_string(top) + "," + std::to_string(left) + ") " +
                          std::to_string(height) + "x" + std::to_string(width) +
                          " outside image " + img.shape_string());
    }
    Image out(height, width, img.channels());
    const int c = img.channels();
    for (int y = 0; y < height; ++y) {
        const double* row = &img.data()[(static_cast<std::size_t>(top + y) * img.width() + left) * c];
        std::copy(row, row + static_cast<std::size_t>(width) * c,
                  &out.data()[static_cast<std::size_t>(y) * width * c]);
    }
    return out;
}

Image resize(const Image& img, int height, int width) {
    if (height <= 0 || width <= 0) {
        throw ShapeError("resize target must be positive");
    }
    if (img.empty()) {
        throw ShapeError("cannot resize an empty image");
    }
    const int c = img.channels();
    Image out(height, width, c);
    const double sy = height > 1 ? static_cast<double>(img.height() - 1) / (height - 1) : 0.0;
    const double sx = width > 1 ? static_cast<double>(img.width() - 1) / (width - 1) : 0.0;
    for (int y = 0; y < height; ++y) {
        const double fy = y * sy;
        const int y0 = std::min(static_cast<int>(fy), img.height() - 1);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = x * sx;
            const int x0 = std::min(static_cast<int>(fx), img.width() - 1);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            for (int k = 0; k < c; ++k) {
                const double top = img(y0, x0, k) * (1.0 - wx) + img(y0, x1, k) * wx;
                const double bot = img(y1, x0, k) * (1.0 - wx) + img(y1, x1, k) * wx;
                out(y, x, k) = clamp01(top * (1.0 - wy) + bot * wy);
            }
        }
    }
    return out;
}

Image rotate180(const Image& img) {
    Image out(img.height(), img.width(), img.channels());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int k = 0; k < img.channels(); ++k)
                out(img.height() - 1 - y, img.width() - 1 - x, k) = img(y, x, k);
    return out;
}

Image load_image(const std::filesystem::path& path) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) {
        throw IoError("cannot read image " + path.string());
    }
    if (raw.depth() != CV_8U) {
        throw IoError("only 8-bit images are supported: " + path.string());
    }
    cv::Mat rgb;
    int channels = 3;
    switch (raw.channels()) {
        case 1: rgb = raw; channels = 1; break;
        case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
        case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
        default: throw IoError("unsupported channel count in " + path.string());
    }
    Image img(rgb.rows, rgb.cols, channels);
    auto dst = img.data();
    std::size_t i = 0;
    for (int y = 0; y < rgb.rows; ++y) {
        const auto* row = rgb.ptr<unsigned char>(y);
        for (int x = 0; x < rgb.cols * channels; ++x) {
            dst[i++] = row[x] / 255.0;
        }
    }
    return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
    if (img.empty()) {
        throw IoError("refusing to write an empty image to " + path.string());
    }
    const int c = img.channels();
    cv::Mat mat(img.height(), img.width(), c == 1 ? CV_8UC1 : CV_8UC3);
    auto src = img.data();
    std::size_t i = 0;
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < img.width() * c; ++x) {
            row[x] = static_cast<unsigned char>(std::lround(clamp01(src[i++]) * 255.0));
        }
    }
    if (c == 3) {
        cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    }
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) {
        throw IoError("cannot write " + path.string());
    }
}

}  // namespace nde
