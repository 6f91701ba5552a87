#include "nde/synthesis.hpp"

#include "nde/errors.hpp"

#include <algorithm>
#include <cctype>

namespace nde {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<fs::path> find_with_stem(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

}  // namespace

Manifest synthesize_dataset(const fs::path& source, const fs::path& out, const SynthesisOptions& options) {
    options.night.validate();
    if (options.betas.empty()) throw ConfigError("at least one beta is required");
    if (!(options.depth_max > 0.0)) throw ConfigError("depth_max must be positive");
    const auto clear_files = sorted_images(source / "clear");
    if (!fs::is_directory(source / "clear")) {
        throw IoError("no clear/ directory under " + source.string());
    }
    fs::create_directories(out / "clear");
    fs::create_directories(out / "hazy");

    for (const auto& clear_path : clear_files) {
        const std::string id = clear_path.stem().string();
        const Image clear = load_image(clear_path);
        require_channels(clear, 3, ("clear image " + id).c_str());
        const auto depth_path = find_with_stem(source / "depth", id);
        std::optional<Image> depth;
        if (depth_path) {
            depth = load_image(*depth_path);
            if (depth->channels() != 1) depth = extract_channel(*depth, 0);
        }

        bool wrote_any = false;
        for (double beta : options.betas) {
            const std::string name = format_hazy_name(id, options.airlight, beta);
            Image hazy;
            if (depth) {
                HazeParams hp;
                hp.airlight = options.airlight;
                hp.beta = beta;
                hp.depth = depth;
                hp.depth_scale = options.depth_max;
                hazy = synthesize_haze(clear, hp);
            } else if (const auto pre = find_with_stem(source / "hazy", name)) {
                hazy = load_image(*pre);
            } else {
                continue;
            }
            save_image(darken_night(hazy, options.night), out / "hazy" / (name + ".png"));
            wrote_any = true;
        }
        if (wrote_any) save_image(clear, out / "clear" / (id + ".png"));
    }

    VariantFilter filter;
    filter.airlight = options.airlight;
    filter.betas = options.betas;
    return build_manifest(out, filter);
}

}  // namespace nde
