#include "nde/config.hpp"

#include "nde/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace nde {

namespace {

double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    long long v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + text + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

template <std::size_t N>
std::string fmt_list(const std::array<double, N>& xs) {
    std::string s;
    for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
}

template <std::size_t N>
std::string fmt_list(const std::array<int, N>& xs) {
    std::string s;
    for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

template <typename T, std::size_t N>
std::array<T, N> parse_list(const std::string& key, const std::string& text) {
    std::array<T, N> out{};
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (i >= N) break;
        if constexpr (std::is_same_v<T, double>) {
            out[i] = parse_real(key, item);
        } else {
            out[i] = static_cast<T>(parse_int(key, item));
        }
        ++i;
    }
    if (i != N || std::getline(ss, item, ',')) {
        throw ConfigError("key '" + key + "': expected " + std::to_string(N) + " comma-separated values");
    }
    return out;
}

struct Field {
    const char* key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define NDE_REAL(name, member)                                                                   \
    Field{name, [](TrainConfig& c, const std::string& v) { c.member = parse_real(name, v); },   \
          [](const TrainConfig& c) { return fmt(c.member); }}
#define NDE_INT(name, member)                                                                    \
    Field{name,                                                                                   \
          [](TrainConfig& c, const std::string& v) {                                             \
              c.member = static_cast<decltype(c.member)>(parse_int(name, v));                     \
          },                                                                                      \
          [](const TrainConfig& c) { return std::to_string(c.member); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        NDE_REAL("learning_rate", learning_rate),
        NDE_REAL("adam_beta1", adam_beta1),
        NDE_REAL("adam_beta2", adam_beta2),
        NDE_REAL("adam_eps", adam_eps),
        NDE_INT("batch_size", batch_size),
        NDE_INT("crop", crop),
        NDE_INT("epochs_stage1", epochs_stage1),
        NDE_INT("epochs_stage2", epochs_stage2),
        NDE_INT("max_steps", max_steps),
        NDE_INT("seed", seed),
        Field{"augment", [](TrainConfig& c, const std::string& v) { c.augment = parse_bool("augment", v); },
              [](const TrainConfig& c) { return std::string(c.augment ? "true" : "false"); }},
        NDE_REAL("scale_min", scale_min),
        NDE_REAL("scale_max", scale_max),
        NDE_INT("validate_every", validate_every),
        NDE_REAL("lambda_dd", decomp_weights.dd),
        NDE_REAL("lambda_nn", decomp_weights.nn),
        NDE_REAL("lambda_nd", decomp_weights.nd),
        NDE_REAL("lambda_dn", decomp_weights.dn),
        NDE_REAL("lambda_smooth", decomp_weights.smooth),
        NDE_REAL("lambda_recon_s", recon_weights.image),
        NDE_REAL("lambda_recon_i", recon_weights.illumination),
        NDE_REAL("lambda_recon_r", recon_weights.reflectance),
        NDE_REAL("lambda_phi", recon_weights.perceptual),
        Field{"layer_weights",
              [](TrainConfig& c, const std::string& v) {
                  c.recon_weights.layer_weights = parse_list<double, 4>("layer_weights", v);
              },
              [](const TrainConfig& c) { return fmt_list(c.recon_weights.layer_weights); }},
        NDE_INT("unet_base_channels", decomp_net.base_channels),
        NDE_INT("unet_depth", decomp_net.depth),
        Field{"unet_batch_norm",
              [](TrainConfig& c, const std::string& v) { c.decomp_net.batch_norm = parse_bool("unet_batch_norm", v); },
              [](const TrainConfig& c) { return std::string(c.decomp_net.batch_norm ? "true" : "false"); }},
        NDE_INT("enhance_layers", enhance_net.num_layers),
        NDE_INT("enhance_channels", enhance_net.hidden_channels),
        NDE_INT("enhance_kernel", enhance_net.kernel),
        Field{"dense_layers",
              [](TrainConfig& c, const std::string& v) {
                  c.dehaze_net.layers_per_block = parse_list<int, 3>("dense_layers", v);
              },
              [](const TrainConfig& c) { return fmt_list(c.dehaze_net.layers_per_block); }},
        NDE_INT("dense_growth", dehaze_net.growth_rate),
        NDE_INT("dense_stem_channels", dehaze_net.stem_channels),
        NDE_INT("dense_bottleneck_factor", dehaze_net.bottleneck_factor),
        NDE_INT("pyramid_branch_channels", dehaze_net.pyramid_branch_channels),
        NDE_INT("dehaze_refine_channels", dehaze_net.refine_channels),
        NDE_REAL("dehaze_dropout", dehaze_net.dropout),
        Field{"feature_channels",
              [](TrainConfig& c, const std::string& v) {
                  c.feature_net.stage_channels = parse_list<int, 4>("feature_channels", v);
              },
              [](const TrainConfig& c) { return fmt_list(c.feature_net.stage_channels); }},
        Field{"feature_convs",
              [](TrainConfig& c, const std::string& v) {
                  c.feature_net.convs_per_stage = parse_list<int, 4>("feature_convs", v);
              },
              [](const TrainConfig& c) { return fmt_list(c.feature_net.convs_per_stage); }},
        NDE_INT("feature_seed", feature_net.seed),
        Field{"feature_weights", [](TrainConfig& c, const std::string& v) { c.feature_weights = v; },
              [](const TrainConfig& c) { return c.feature_weights; }},
        Field{"encoder_weights", [](TrainConfig& c, const std::string& v) { c.encoder_weights = v; },
              [](const TrainConfig& c) { return c.encoder_weights; }},
    };
    return table;
}

#undef NDE_REAL
#undef NDE_INT

const Field& find_field(const std::string& key) {
    for (const auto& f : fields()) {
        if (key == f.key) return f;
    }
    std::string valid;
    for (const auto& f : fields()) valid += std::string(valid.empty() ? "" : ", ") + f.key;
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.crop = 96;
    c.max_steps = 50;
    return c;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    find_field(key).set(*this, value);
}

std::string TrainConfig::get(const std::string& key) const {
    return find_field(key).get(*this);
}

std::vector<std::string> TrainConfig::keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_kv() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
    return out;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string TrainConfig::hash() const {
    std::string text;
    for (const auto& [k, v] : to_kv()) text += k + "=" + v + "\n";
    return fnv1a_hex(text);
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (crop <= 0) throw ConfigError("crop must be positive");
    if (epochs_stage1 < 0 || epochs_stage2 < 0 || max_steps < 0) {
        throw ConfigError("epoch and step counts must be >= 0");
    }
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("need 0 < scale_min <= scale_max");
    decomp_weights.validate();
    recon_weights.validate();
    decomp_net.validate();
    enhance_net.validate();
    dehaze_net.validate();
    feature_net.validate();
}

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": sections are not supported");
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void apply_config(TrainConfig& cfg, const std::vector<std::pair<std::string, std::string>>& file_entries,
                  const std::vector<std::string>& overrides) {
    for (const auto& [k, v] : file_entries) cfg.set(k, v);
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
        cfg.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
    cfg.validate();
}

}  // namespace nde
