#include "nde/metrics.hpp"

#include "nde/errors.hpp"

#include "json.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

extern char** environ;

namespace nde {

namespace fs = std::filesystem;

double psnr(const Image& a, const Image& b, double max_val) {
    require_same_shape(a, b, "psnr");
    if (a.empty()) throw ShapeError("psnr of empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double centre = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - centre;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

namespace {

// Separable "valid" filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    if (a.height() < params.window || a.width() < params.window) {
        throw ShapeError("ssim: image " + a.shape_string() + " is smaller than the " +
                         std::to_string(params.window) + "x" + std::to_string(params.window) + " window");
    }
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    const auto kernel = gaussian_kernel(params.window, params.sigma);
    const int h = a.height(), w = a.width(), nc = a.channels();
    const std::size_t n = a.pixel_count();

    double total = 0.0;
    for (int c = 0; c < nc; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = a.data()[p * nc + c];
            y[p] = b.data()[p * nc + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = filter_valid(x, h, w, kernel);
        const auto my = filter_valid(y, h, w, kernel);
        const auto sxx = filter_valid(xx, h, w, kernel);
        const auto syy = filter_valid(yy, h, w, kernel);
        const auto sxy = filter_valid(xy, h, w, kernel);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cxy = sxy[i] - mx[i] * my[i];
            sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    return total / nc;
}

void MetricsRecord::finalize() {
    std::sort(images.begin(), images.end(),
              [](const ImageMetrics& x, const ImageMetrics& y) { return x.image_id < y.image_id; });
    double ssim_sum = 0.0, psnr_sum = 0.0;
    std::size_t n_psnr = 0;
    count = failed = infinite_psnr = 0;
    for (const auto& m : images) {
        if (!m.ok()) {
            ++failed;
            continue;
        }
        ssim_sum += m.ssim;
        ++count;
        if (std::isinf(m.psnr)) {
            ++infinite_psnr;
        } else {
            psnr_sum += m.psnr;
            ++n_psnr;
        }
    }
    mean_ssim = count ? ssim_sum / static_cast<double>(count) : 0.0;
    if (n_psnr) {
        mean_psnr = psnr_sum / static_cast<double>(n_psnr);
    } else {
        mean_psnr = count ? std::numeric_limits<double>::infinity() : 0.0;
    }
}

// Cascades ------------------------------------------------------------------

CascadeStage identity_stage() {
    return {"identity", [](const Image& img) { return img; }};
}

CascadeStage gamma_stage(double gamma) {
    if (!(gamma > 0.0)) throw DomainError("gamma stage needs a positive exponent");
    std::ostringstream name;
    name << "gamma:" << gamma;
    return {name.str(), [gamma](const Image& img) { return gamma_correct(img, gamma); }};
}

namespace {

std::atomic<unsigned long> g_adapter_counter{0};

int run_shell(const std::string& command, const std::string& in, const std::string& out) {
    // The command text goes to the shell; the paths are passed as positional
    // arguments so they are never re-parsed.
    const std::string script = command + " \"$1\" \"$2\"";
    std::vector<std::string> args = {"/bin/sh", "-c", script, "nde-adapter", in, out};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, "/bin/sh", nullptr, nullptr, argv.data(), environ) != 0) {
        return -1;
    }
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace

CascadeStage external_stage(const std::string& command) {
    return {"cmd:" + command, [command](const Image& img) {
                const auto id = g_adapter_counter.fetch_add(1);
                const fs::path dir = fs::temp_directory_path() /
                                     ("nde_adapter_" + std::to_string(::getpid()) + "_" + std::to_string(id));
                fs::create_directories(dir);
                const fs::path in = dir / "in.png";
                const fs::path out = dir / "out.png";
                struct Cleanup {
                    fs::path d;
                    ~Cleanup() {
                        std::error_code ec;
                        fs::remove_all(d, ec);
                    }
                } cleanup{dir};
                save_image(img, in);
                const int rc = run_shell(command, in.string(), out.string());
                if (rc != 0) {
                    throw Error("adapter '" + command + "' exited with status " + std::to_string(rc));
                }
                if (!fs::exists(out)) {
                    throw Error("adapter '" + command + "' produced no output image");
                }
                return load_image(out);
            }};
}

bool parse_builtin_stage(const std::string& text, CascadeStage& out) {
    if (text == "identity" || text == "noop") {
        out = identity_stage();
        return true;
    }
    if (text.rfind("gamma:", 0) == 0) {
        try {
            std::size_t used = 0;
            const std::string arg = text.substr(6);
            const double g = std::stod(arg, &used);
            if (used != arg.size()) return false;
            out = gamma_stage(g);
            return true;
        } catch (const std::logic_error&) {
            return false;
        }
    }
    if (text.rfind("cmd:", 0) == 0 && text.size() > 4) {
        out = external_stage(text.substr(4));
        return true;
    }
    return false;
}

Image run_cascade(const CascadeSpec& spec, const Image& img, const CascadeRunOptions& opts) {
    if (spec.stages.empty()) throw ConfigError("cascade needs at least one stage");
    if (opts.stage_ms) opts.stage_ms->clear();
    Image current = img;
    for (std::size_t k = 0; k < spec.stages.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            current = spec.stages[k].apply(current);
        } catch (const std::exception& e) {
            throw StageError(k, spec.stages[k].name + ": " + e.what());
        }
        current.clamp();
        if (opts.stage_ms) {
            opts.stage_ms->push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        if (!opts.persist_dir.empty()) {
            save_image(current, opts.persist_dir / (opts.persist_prefix + "_stage" + std::to_string(k) + ".png"));
        }
    }
    return current;
}

MetricsRecord evaluate(const CascadeSpec& spec, const Manifest& manifest, Partition partition) {
    const auto pairs = partition_pairs(manifest, partition);
    if (pairs.empty()) {
        throw ManifestError(std::string("partition '") + to_string(partition) + "' is empty");
    }
    MetricsRecord record;
    ImageCache cache;
    for (const auto& ref : pairs) {
        ImageMetrics m;
        m.image_id = fs::path(manifest.scenes[ref.scene].variants[ref.variant].path).stem().string();
        try {
            const TrainingPair pair = load_pair(manifest, ref, cache);
            CascadeRunOptions opts;
            opts.stage_ms = &m.stage_ms;
            const Image out = run_cascade(spec, pair.night_hazy, opts);
            if (!out.same_shape(pair.clear)) {
                throw ShapeError("output " + out.shape_string() + " does not match target " +
                                 pair.clear.shape_string());
            }
            m.ssim = ssim(out, pair.clear);
            m.psnr = psnr(out, pair.clear);
        } catch (const std::exception& e) {
            m.error = e.what();
        }
        record.images.push_back(std::move(m));
    }
    record.finalize();
    return record;
}

namespace {

std::string fmt_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

void write_metrics_csv(const MetricsRecord& record, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "image_id,ssim,psnr,stage_timings_ms\n";
    for (const auto& m : record.images) {
        std::string timings;
        for (std::size_t i = 0; i < m.stage_ms.size(); ++i) {
            if (i) timings += ";";
            std::ostringstream os;
            os << std::fixed << std::setprecision(3) << m.stage_ms[i];
            timings += os.str();
        }
        if (m.ok()) {
            out << m.image_id << "," << fmt_metric(m.ssim) << "," << fmt_metric(m.psnr) << "," << timings << "\n";
        } else {
            out << m.image_id << ",nan,nan," << timings << "\n";
        }
    }
}

void write_metrics_summary(const MetricsRecord& record, const fs::path& path) {
    nlohmann::json doc;
    doc["count"] = record.count;
    doc["failed"] = record.failed;
    doc["infinite_psnr"] = record.infinite_psnr;
    doc["mean_ssim"] = record.mean_ssim;
    doc["mean_psnr"] = fmt_metric(record.mean_psnr);
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& m : record.images) {
        if (!m.ok()) errors.push_back({{"image_id", m.image_id}, {"error", m.error}});
    }
    doc["errors"] = std::move(errors);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

// Comparison grid -------------------------------------------------------------

Image emit_comparison_grid(const std::vector<GridRow>& rows) {
    if (rows.empty()) throw LayoutError("grid needs at least one row");
    const std::size_t cols = rows.front().images.size();
    if (cols == 0) throw LayoutError("grid rows need at least one image");
    std::vector<int> col_w(cols), col_h(cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].images.size() != cols) {
            throw LayoutError("row '" + rows[r].label + "' has " + std::to_string(rows[r].images.size()) +
                              " images, expected " + std::to_string(cols));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const Image& img = rows[r].images[c];
            if (r == 0) {
                col_w[c] = img.width();
                col_h[c] = img.height();
            } else if (img.width() != col_w[c] || img.height() != col_h[c]) {
                throw LayoutError("column " + std::to_string(c) + " mixes image sizes");
            }
        }
    }
    const int row_h = *std::max_element(col_h.begin(), col_h.end());
    int total_w = 0;
    for (int w : col_w) total_w += w;
    const int total_h = static_cast<int>(rows.size()) * row_h + kGridLabelHeight;

    cv::Mat canvas(total_h, total_w, CV_8UC3, cv::Scalar(0, 0, 0));
    std::string caption;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r) caption += "  |  ";
        caption += std::to_string(r + 1) + ": " + rows[r].label;
    }
    cv::putText(canvas, caption, cv::Point(4, kGridLabelHeight - 6), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(255, 255, 255), 1, cv::LINE_8);

    Image out(total_h, total_w, 3);
    for (int y = 0; y < kGridLabelHeight; ++y)
        for (int x = 0; x < total_w; ++x)
            for (int k = 0; k < 3; ++k) out(y, x, k) = canvas.at<cv::Vec3b>(y, x)[k] / 255.0;

    for (std::size_t r = 0; r < rows.size(); ++r) {
        int x0 = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            const Image& img = rows[r].images[c];
            const int y0 = kGridLabelHeight + static_cast<int>(r) * row_h;
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    for (int k = 0; k < 3; ++k) {
                        const double v = img(y, x, img.channels() == 1 ? 0 : k);
                        out(y0 + y, x0 + x, k) = std::clamp(v, 0.0, 1.0);
                    }
            x0 += col_w[c];
        }
    }
    return out;
}

}  // namespace nde
