// nde: command-line front end for synthesis, splitting, training, inference
// and evaluation.

#include "nde/config.hpp"
#include "nde/dataset.hpp"
#include "nde/errors.hpp"
#include "nde/metrics.hpp"
#include "nde/synthesis.hpp"
#include "nde/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kSubcommands = {"synthesize", "split", "train-decom", "train-full",
                                               "infer", "eval", "cascade-eval", "grid"};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string closest_subcommand(const std::string& word) {
    std::string best = kSubcommands.front();
    std::size_t best_d = edit_distance(word, best);
    for (const auto& s : kSubcommands) {
        const std::size_t d = edit_distance(word, s);
        if (d < best_d) {
            best = s;
            best_d = d;
        }
    }
    return best;
}

// Global options that consume the following argument.
bool takes_value(const std::string& arg) {
    return arg == "--config" || arg == "--set" || arg == "--preset" || arg == "--data-root";
}

struct Globals {
    std::string preset = "paper";
    std::string config_file;
    std::vector<std::string> overrides;
    std::string data_root;
    bool overwrite = false;
    bool quiet = false;
};

nde::TrainConfig resolve_config(const Globals& g) {
    nde::TrainConfig cfg;
    if (g.preset == "desk") {
        cfg = nde::TrainConfig::desk();
    } else if (g.preset != "paper") {
        throw UsageError("unknown preset '" + g.preset + "' (expected paper or desk)");
    }
    std::vector<std::pair<std::string, std::string>> file_entries;
    if (!g.config_file.empty()) file_entries = nde::parse_kv_file(g.config_file);
    nde::apply_config(cfg, file_entries, g.overrides);
    return cfg;
}

/// Refuses to write into a directory holding earlier results unless
/// `overwrite` is set, in which case the listed products are removed first.
void claim_output_dir(const fs::path& dir, bool overwrite, const std::vector<std::string>& products) {
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        throw nde::IoError(dir.string() + " exists and is not a directory");
    }
    std::vector<fs::path> present;
    for (const auto& p : products) {
        if (fs::exists(dir / p)) present.push_back(dir / p);
    }
    if (!present.empty() && !overwrite) {
        throw nde::IoError("refusing to overwrite " + present.front().string() + " (pass --overwrite)");
    }
    for (const auto& p : present) fs::remove_all(p);
    fs::create_directories(dir);
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw nde::IoError("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

void write_run_header(const fs::path& dir, const std::string& subcommand, const nde::TrainConfig& cfg,
                      const std::vector<std::string>& argv) {
    json h;
    h["tool"] = "nde";
    h["version"] = NDE_VERSION;
    h["subcommand"] = subcommand;
    h["seed"] = cfg.seed;
    h["config_hash"] = cfg.hash();
    json kv = json::object();
    for (const auto& [k, v] : cfg.to_kv()) kv[k] = v;
    h["config"] = kv;
    h["argv"] = argv;
    write_json(h, dir / "run_header.json");
}

fs::path manifest_path(const std::string& explicit_path, const Globals& g) {
    if (!explicit_path.empty()) return explicit_path;
    if (g.data_root.empty()) throw UsageError("--manifest or --data-root is required");
    return fs::path(g.data_root) / "manifest.json";
}

nde::Partition parse_partition(const std::string& s) {
    try {
        return nde::partition_from_string(s);
    } catch (const nde::Error&) {
        throw UsageError("unknown partition '" + s + "' (expected train or test)");
    }
}

std::function<void(int, double)> progress_printer(bool quiet, int total) {
    if (quiet) return {};
    return [total](int step, double loss) {
        if (step == 1 || step % 10 == 0 || step == total) {
            std::cerr << "step " << step << "/" << total << "  loss " << loss << '\n';
        }
    };
}

std::vector<fs::path> collect_inputs(const fs::path& input) {
    std::vector<fs::path> out;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input)) {
            auto ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
            if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) out.push_back(e.path());
        }
        std::sort(out.begin(), out.end());
    } else if (fs::exists(input)) {
        out.push_back(input);
    } else {
        throw nde::IoError("no such input: " + input.string());
    }
    return out;
}

json summary_json(const nde::MetricsRecord& r) {
    return {{"count", r.count}, {"failed", r.failed}, {"mean_ssim", r.mean_ssim}, {"mean_psnr", r.mean_psnr},
            {"infinite_psnr", r.infinite_psnr}};
}

nde::CascadeStage parse_stage(const std::string& text) {
    nde::CascadeStage stage;
    if (nde::parse_builtin_stage(text, stage)) return stage;
    const std::string prefix = "ndenet:";
    if (text.rfind(prefix, 0) == 0) {
        auto model = std::make_shared<nde::NdeModel>(nde::load_model(text.substr(prefix.size())));
        return {text, [model](const nde::Image& img) { return model->infer(img).output; }};
    }
    throw UsageError("unknown stage '" + text + "' (expected identity, gamma:<g>, cmd:<command> or ndenet:<ckpt>)");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);

    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.empty() || a[0] == '-') {
            if (takes_value(a)) ++i;
            continue;
        }
        if (std::find(kSubcommands.begin(), kSubcommands.end(), a) == kSubcommands.end()) {
            std::cerr << "nde: unknown subcommand '" << a << "'; did you mean '" << closest_subcommand(a) << "'?\n"
                      << "Run 'nde --help' for the list of subcommands.\n";
            return 1;
        }
        break;
    }

    CLI::App app{"Nighttime dehazing and enhancement toolkit", "nde"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(NDE_VERSION));

    Globals g;
    if (const char* env = std::getenv("NDE_DATA_ROOT")) g.data_root = env;
    app.add_option("--preset", g.preset, "Configuration preset: paper or desk")->capture_default_str();
    app.add_option("--config", g.config_file, "Flat key = value configuration file");
    app.add_option("--set", g.overrides, "Override one configuration key (key=value); repeatable")
        ->take_all()
        ->allow_extra_args(false);
    app.add_option("--data-root", g.data_root, "Dataset root (default: $NDE_DATA_ROOT)");
    app.add_flag("--overwrite", g.overwrite, "Replace earlier outputs");
    app.add_flag("-q,--quiet", g.quiet, "Only print errors");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "Build a nighttime hazy corpus from clear images");
    nde::SynthesisOptions synth_opts;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--depth-max", synth_opts.depth_max, "Metres represented by depth value 1")
        ->capture_default_str();
    synth->add_option("--v-scale", synth_opts.night.v_scale, "HSV value multiplier")->capture_default_str();
    synth->add_option("--gamma-dark", synth_opts.night.gamma_dark, "Darkening gamma")->capture_default_str();
    synth->add_option("--airlight", synth_opts.airlight, "Atmospheric light A")->capture_default_str();
    synth->add_option("--beta", synth_opts.betas, "Scattering coefficients")->capture_default_str();

    // split
    auto* split = app.add_subcommand("split", "Assign scenes to train/test");
    std::string split_manifest, split_out;
    int ratio_train = 3, ratio_test = 1;
    split->add_option("--manifest", split_manifest, "Input manifest (default: <data-root>/manifest.json)");
    split->add_option("--out", split_out, "Output directory")->required();
    split->add_option("--train-parts", ratio_train, "Train share of the ratio")->capture_default_str();
    split->add_option("--test-parts", ratio_test, "Test share of the ratio")->capture_default_str();

    // train-decom
    auto* tdecom = app.add_subcommand("train-decom", "Stage 1: train the decomposition network");
    std::string td_manifest, td_out, td_resume;
    tdecom->add_option("--manifest", td_manifest, "Split manifest");
    tdecom->add_option("--out", td_out, "Output directory")->required();
    tdecom->add_option("--resume", td_resume, "Continue from a stage-1 checkpoint");

    // train-full
    auto* tfull = app.add_subcommand("train-full", "Stage 2: train enhancement and dehazing");
    std::string tf_manifest, tf_out, tf_decom, tf_resume;
    tfull->add_option("--manifest", tf_manifest, "Split manifest");
    tfull->add_option("--decom", tf_decom, "Stage-1 checkpoint")->required();
    tfull->add_option("--out", tf_out, "Output directory")->required();
    tfull->add_option("--resume", tf_resume, "Continue from a stage-2 checkpoint");

    // infer
    auto* infer = app.add_subcommand("infer", "Run the full model on images");
    std::string inf_ckpt, inf_input, inf_out;
    bool inf_intermediates = false;
    infer->add_option("--checkpoint", inf_ckpt, "Full checkpoint")->required();
    infer->add_option("--input", inf_input, "Image file or directory")->required();
    infer->add_option("--out", inf_out, "Output directory")->required();
    infer->add_flag("--intermediates", inf_intermediates, "Also write I_N, R_N, I_Y and R_Y");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a checkpoint on a manifest partition");
    std::string ev_ckpt, ev_manifest, ev_out, ev_partition = "test";
    bool ev_baseline = false;
    eval->add_option("--checkpoint", ev_ckpt, "Full checkpoint")->required();
    eval->add_option("--manifest", ev_manifest, "Split manifest");
    eval->add_option("--partition", ev_partition, "train or test")->capture_default_str();
    eval->add_option("--out", ev_out, "Output directory")->required();
    eval->add_flag("--baseline", ev_baseline, "Also score the unprocessed input");

    // cascade-eval
    auto* casc = app.add_subcommand("cascade-eval", "Score a sequence of image-to-image stages");
    std::vector<std::string> cs_stages;
    std::string cs_manifest, cs_out, cs_partition = "test";
    casc->add_option("--stage", cs_stages,
                     "Stage in application order: identity, gamma:<g>, cmd:<command>, ndenet:<ckpt>")
        ->required()
        ->allow_extra_args(false);
    casc->add_option("--manifest", cs_manifest, "Split manifest");
    casc->add_option("--partition", cs_partition, "train or test")->capture_default_str();
    casc->add_option("--out", cs_out, "Output directory")->required();

    // grid
    auto* grid = app.add_subcommand("grid", "Tile images into a labelled comparison grid");
    std::vector<std::string> grid_rows;
    std::string grid_out;
    grid->add_option("--row", grid_rows, "label=img1,img2,...; repeatable, top to bottom")
        ->required()
        ->allow_extra_args(false);
    grid->add_option("--out", grid_out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        const nde::TrainConfig cfg = resolve_config(g);

        if (sub == "synthesize") {
            if (g.data_root.empty()) throw UsageError("--data-root (or NDE_DATA_ROOT) is required");
            if (fs::exists(synth_out) && fs::equivalent(g.data_root, synth_out)) {
                throw UsageError("--out must differ from the source data root");
            }
            claim_output_dir(synth_out, g.overwrite, {"clear", "hazy", "manifest.json", "run_header.json"});
            const auto manifest = nde::synthesize_dataset(g.data_root, synth_out, synth_opts);
            nde::save_manifest(manifest, fs::path(synth_out) / "manifest.json");
            write_run_header(synth_out, sub, cfg, args);
            for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << '\n';
            if (!g.quiet) {
                std::cout << "wrote " << manifest.hazy_count() << " hazy images for " << manifest.scenes.size()
                          << " scenes to " << synth_out << '\n';
            }
        } else if (sub == "split") {
            const auto in = manifest_path(split_manifest, g);
            auto manifest = nde::load_manifest(in);
            claim_output_dir(split_out, g.overwrite, {"manifest.json", "run_header.json"});
            manifest = nde::split_scenes(std::move(manifest), cfg.seed, ratio_train, ratio_test);
            nde::save_manifest(manifest, fs::path(split_out) / "manifest.json");
            write_run_header(split_out, sub, cfg, args);
            if (!g.quiet) {
                std::cout << manifest.scene_count(nde::Partition::Train) << " train / "
                          << manifest.scene_count(nde::Partition::Test) << " test scenes (seed " << cfg.seed
                          << ")\n";
            }
        } else if (sub == "train-decom") {
            const auto manifest = nde::load_manifest(manifest_path(td_manifest, g));
            claim_output_dir(td_out, g.overwrite, {"decom.ckpt", "loss_log.csv", "report.json", "run_header.json"});
            write_run_header(td_out, sub, cfg, args);
            nde::StageRunOptions opts;
            opts.resume = td_resume;
            const int total = cfg.max_steps > 0 ? cfg.max_steps : 0;
            opts.progress = progress_printer(g.quiet, total);
            const auto report = nde::train_stage1(manifest, cfg, td_out, opts);
            write_json({{"steps", report.steps},
                        {"first_loss", report.first_loss},
                        {"last_loss", report.last_loss},
                        {"heldout_decom_before", report.heldout_before},
                        {"heldout_decom_after", report.heldout_after},
                        {"heldout_reconstruction_error", report.reconstruction_error}},
                       fs::path(td_out) / "report.json");
            if (!g.quiet) {
                std::cout << "held-out L_decom " << report.heldout_before << " -> " << report.heldout_after
                          << "; checkpoint " << report.checkpoint.string() << '\n';
            }
        } else if (sub == "train-full") {
            const auto manifest = nde::load_manifest(manifest_path(tf_manifest, g));
            claim_output_dir(tf_out, g.overwrite, {"full.ckpt", "loss_log.csv", "report.json", "run_header.json"});
            write_run_header(tf_out, sub, cfg, args);
            nde::StageRunOptions opts;
            opts.resume = tf_resume;
            opts.progress = progress_printer(g.quiet, cfg.max_steps);
            const auto report = nde::train_stage2(manifest, cfg, tf_decom, tf_out, opts);
            write_json({{"steps", report.steps},
                        {"first_loss", report.first_loss},
                        {"last_loss", report.last_loss},
                        {"val_ssim_before", report.heldout_before},
                        {"val_ssim_after", report.heldout_after},
                        {"baseline_ssim", report.baseline_ssim},
                        {"decomposition_digest_before", report.frozen_digest_before},
                        {"decomposition_digest_after", report.frozen_digest_after}},
                       fs::path(tf_out) / "report.json");
            if (!g.quiet) {
                std::cout << "validation SSIM " << report.heldout_before << " -> " << report.heldout_after
                          << " (input baseline " << report.baseline_ssim << "); checkpoint "
                          << report.checkpoint.string() << '\n';
            }
        } else if (sub == "infer") {
            auto model = nde::load_model(inf_ckpt);
            const auto inputs = collect_inputs(inf_input);
            std::vector<std::string> products{"run_header.json"};
            for (const auto& p : inputs) {
                const std::string stem = p.stem().string();
                products.push_back(stem + "_output.png");
                if (inf_intermediates) {
                    for (const char* s : {"_illumination.png", "_reflectance.png", "_enhanced.png", "_dehazed.png"}) {
                        products.push_back(stem + s);
                    }
                }
            }
            claim_output_dir(inf_out, g.overwrite, products);
            write_run_header(inf_out, sub, cfg, args);
            for (const auto& p : inputs) {
                const auto r = model.infer(nde::load_image(p));
                const fs::path base = fs::path(inf_out) / p.stem();
                nde::save_image(r.output, base.string() + "_output.png");
                if (inf_intermediates) {
                    nde::save_image(r.illumination, base.string() + "_illumination.png");
                    nde::save_image(r.reflectance, base.string() + "_reflectance.png");
                    nde::save_image(r.enhanced, base.string() + "_enhanced.png");
                    nde::save_image(r.dehazed, base.string() + "_dehazed.png");
                }
            }
            if (!g.quiet) std::cout << "processed " << inputs.size() << " images into " << inf_out << '\n';
        } else if (sub == "eval") {
            const auto manifest = nde::load_manifest(manifest_path(ev_manifest, g));
            const auto partition = parse_partition(ev_partition);
            claim_output_dir(ev_out, g.overwrite,
                             {"metrics.csv", "summary.json", "baseline_metrics.csv", "run_header.json"});
            write_run_header(ev_out, sub, cfg, args);
            nde::CascadeSpec spec;
            spec.stages.push_back(parse_stage("ndenet:" + ev_ckpt));
            const auto record = nde::evaluate(spec, manifest, partition);
            nde::write_metrics_csv(record, fs::path(ev_out) / "metrics.csv");
            json summary = {{"model", summary_json(record)}};
            if (ev_baseline) {
                nde::CascadeSpec identity;
                identity.stages.push_back(nde::identity_stage());
                const auto base = nde::evaluate(identity, manifest, partition);
                nde::write_metrics_csv(base, fs::path(ev_out) / "baseline_metrics.csv");
                summary["baseline"] = summary_json(base);
            }
            write_json(summary, fs::path(ev_out) / "summary.json");
            if (!g.quiet) {
                std::cout << "SSIM " << record.mean_ssim << "  PSNR " << record.mean_psnr << " dB over "
                          << record.count << " images";
                if (record.failed) std::cout << " (" << record.failed << " failed)";
                std::cout << '\n';
            }
        } else if (sub == "cascade-eval") {
            const auto manifest = nde::load_manifest(manifest_path(cs_manifest, g));
            const auto partition = parse_partition(cs_partition);
            nde::CascadeSpec spec;
            for (const auto& s : cs_stages) spec.stages.push_back(parse_stage(s));
            claim_output_dir(cs_out, g.overwrite, {"metrics.csv", "summary.json", "run_header.json"});
            write_run_header(cs_out, sub, cfg, args);
            const auto record = nde::evaluate(spec, manifest, partition);
            nde::write_metrics_csv(record, fs::path(cs_out) / "metrics.csv");
            nde::write_metrics_summary(record, fs::path(cs_out) / "summary.json");
            if (!g.quiet) {
                std::cout << "SSIM " << record.mean_ssim << "  PSNR " << record.mean_psnr << " dB over "
                          << record.count << " images";
                if (record.failed) std::cout << " (" << record.failed << " failed)";
                std::cout << '\n';
            }
        } else if (sub == "grid") {
            std::vector<nde::GridRow> rows;
            for (const auto& spec : grid_rows) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) throw UsageError("--row expects label=img1,img2,...");
                nde::GridRow row;
                row.label = spec.substr(0, eq);
                std::stringstream ss(spec.substr(eq + 1));
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (!item.empty()) row.images.push_back(nde::load_image(item));
                }
                rows.push_back(std::move(row));
            }
            const fs::path out(grid_out);
            const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
            claim_output_dir(dir, g.overwrite, {out.filename().string()});
            nde::save_image(nde::emit_comparison_grid(rows), out);
            write_run_header(dir, sub, cfg, args);
            if (!g.quiet) std::cout << "wrote " << out.string() << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "nde " << sub << ": " << e.what() << '\n';
        return 1;
    } catch (const nde::ConfigError& e) {
        std::cerr << "nde " << sub << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "nde " << sub << ": error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
