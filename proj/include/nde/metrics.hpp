#pragma once

#include "nde/dataset.hpp"
#include "nde/image.hpp"

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace nde {

// Full-reference metrics ----------------------------------------------------

/// PSNR in dB over all pixels and channels. Identical inputs return +inf.
double psnr(const Image& a, const Image& b, double max_val = 1.0);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Single-scale SSIM: Gaussian-weighted statistics over every full window
/// position ("valid" placement), computed per channel and averaged.
/// Throws ShapeError when either side is smaller than the window.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

/// Normalized 1-D Gaussian taps used by ssim().
std::vector<double> gaussian_kernel(int size, double sigma);

// Evaluation ----------------------------------------------------------------

struct ImageMetrics {
    std::string image_id;
    double ssim = 0.0;
    double psnr = 0.0;
    std::vector<double> stage_ms;
    std::string error;  // non-empty when processing failed

    bool ok() const { return error.empty(); }
};

struct MetricsRecord {
    std::vector<ImageMetrics> images;  // sorted by image_id
    double mean_ssim = 0.0;
    double mean_psnr = 0.0;           // over finite PSNR values only
    std::size_t count = 0;            // images that contributed to mean_ssim
    std::size_t failed = 0;
    std::size_t infinite_psnr = 0;    // excluded from mean_psnr

    /// Sorts per-image entries and recomputes the means in a fixed order.
    void finalize();
};

// Cascades ------------------------------------------------------------------

using ImageFn = std::function<Image(const Image&)>;

struct CascadeStage {
    std::string name;
    ImageFn apply;
};

/// Stages applied strictly left to right.
struct CascadeSpec {
    std::vector<CascadeStage> stages;
};

CascadeStage identity_stage();
CascadeStage gamma_stage(double gamma);

/// Runs `command <in_path> <out_path>` through /bin/sh; exit status 0 means
/// success and `out_path` must then hold the result image.
CascadeStage external_stage(const std::string& command);

/// Parses "identity", "gamma:<g>" or "cmd:<command>". Returns false for
/// anything else so callers can layer their own stage kinds on top.
bool parse_builtin_stage(const std::string& text, CascadeStage& out);

struct CascadeRunOptions {
    std::vector<double>* stage_ms = nullptr;
    /// When set, stage k's output is written to `<dir>/<prefix>_stage<k>.png`.
    std::filesystem::path persist_dir;
    std::string persist_prefix = "img";
};

/// Throws StageError (with the failing stage index) on any stage failure.
Image run_cascade(const CascadeSpec& spec, const Image& img, const CascadeRunOptions& opts = {});

/// Runs the cascade on every pair of `partition` and scores its output
/// against the clear image. Per-image failures are recorded and excluded.
MetricsRecord evaluate(const CascadeSpec& spec, const Manifest& manifest, Partition partition);

/// Columns: image_id,ssim,psnr,stage_timings_ms (timings joined by ';').
void write_metrics_csv(const MetricsRecord& record, const std::filesystem::path& path);
void write_metrics_summary(const MetricsRecord& record, const std::filesystem::path& path);

// Comparison grid -------------------------------------------------------------

struct GridRow {
    std::string label;
    std::vector<Image> images;
};

inline constexpr int kGridLabelHeight = 20;

/// Tiles rows top to bottom under a label strip of kGridLabelHeight pixels
/// that names the rows in order. Output is always 3-channel and measures
/// (rows*H + kGridLabelHeight) x (cols*W). Throws LayoutError for ragged rows
/// or mismatched image sizes within a column.
Image emit_comparison_grid(const std::vector<GridRow>& rows);

}  // namespace nde
