#include "nde/config.hpp"
#include "nde/dataset.hpp"
#include "nde/errors.hpp"
#include "nde/haze.hpp"
#include "nde/metrics.hpp"
#include "nde/retinex.hpp"
#include "nde/synthesis.hpp"
#include "nde/training.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace nde;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    std::vector<double> data(a.data(), a.data() + a.size());
    return Image(h, w, c, std::move(data));
}

Array to_array(const Image& img) {
    std::vector<py::ssize_t> shape = {img.height(), img.width()};
    if (img.channels() != 1) shape.push_back(img.channels());
    Array out(shape);
    std::memcpy(out.mutable_data(), img.data().data(), img.size() * sizeof(double));
    return out;
}

TrainConfig make_config(const std::string& preset, const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    if (preset == "desk") {
        cfg = TrainConfig::desk();
    } else if (preset != "paper") {
        throw ConfigError("unknown preset '" + preset + "' (expected paper or desk)");
    }
    apply_config(cfg, {}, overrides);
    cfg.validate();
    return cfg;
}

py::dict report_dict(const StageReport& r) {
    py::dict d;
    d["checkpoint"] = r.checkpoint.string();
    d["steps"] = r.steps;
    d["first_loss"] = r.first_loss;
    d["last_loss"] = r.last_loss;
    d["heldout_before"] = r.heldout_before;
    d["heldout_after"] = r.heldout_after;
    d["reconstruction_error"] = r.reconstruction_error;
    d["baseline_ssim"] = r.baseline_ssim;
    d["frozen_digest_before"] = r.frozen_digest_before;
    d["frozen_digest_after"] = r.frozen_digest_after;
    return d;
}

HazeParams haze_params(const Array& transmission, double airlight) {
    HazeParams p;
    p.airlight = airlight;
    p.transmission = to_image(transmission);
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Night-time dehazing core";
    m.attr("__version__") = NDE_VERSION;

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, py::arg("path"));
    m.def(
        "save_image", [](const Array& a, const std::filesystem::path& p) { save_image(to_image(a), p); },
        py::arg("image"), py::arg("path"));

    m.def(
        "synthesize_haze",
        [](const Array& clear, const Array& transmission, double airlight) {
            return to_array(synthesize_haze(to_image(clear), haze_params(transmission, airlight)));
        },
        py::arg("clear"), py::arg("transmission"), py::arg("airlight") = 1.0);
    m.def(
        "dehaze_oracle",
        [](const Array& hazy, const Array& transmission, double airlight, bool clamp) {
            return to_array(dehaze_oracle(to_image(hazy), haze_params(transmission, airlight), clamp));
        },
        py::arg("hazy"), py::arg("transmission"), py::arg("airlight") = 1.0, py::arg("clamp") = true);
    m.def(
        "darken_night",
        [](const Array& img, double v_scale, double gamma_dark) {
            return to_array(darken_night(to_image(img), NightParams{v_scale, gamma_dark}));
        },
        py::arg("image"), py::arg("v_scale") = 0.5, py::arg("gamma_dark") = 2.5);
    m.def(
        "recompose",
        [](const Array& i, const Array& r) { return to_array(recompose(to_image(i), to_image(r))); },
        py::arg("illumination"), py::arg("reflectance"));

    m.def(
        "psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); }, py::arg("a"),
        py::arg("b"));
    m.def(
        "comparison_grid",
        [](const std::vector<std::pair<std::string, std::vector<Array>>>& rows) {
            std::vector<GridRow> grid;
            for (const auto& [label, images] : rows) {
                GridRow row{label, {}};
                for (const auto& a : images) row.images.push_back(to_image(a));
                grid.push_back(std::move(row));
            }
            return to_array(emit_comparison_grid(grid));
        },
        py::arg("rows"));

    py::class_<Manifest>(m, "Manifest")
        .def_property_readonly("root", [](const Manifest& mf) { return mf.root.string(); })
        .def_readonly("seed", &Manifest::seed)
        .def_readonly("warnings", &Manifest::warnings)
        .def_property_readonly("scene_ids",
                               [](const Manifest& mf) {
                                   std::vector<std::string> ids;
                                   for (const auto& s : mf.scenes) ids.push_back(s.scene_id);
                                   return ids;
                               })
        .def("hazy_count", &Manifest::hazy_count)
        .def("scene_count", [](const Manifest& mf, const std::string& p) { return mf.scene_count(partition_from_string(p)); })
        .def("partition_of",
             [](const Manifest& mf, const std::string& id) {
                 const SceneRecord* s = mf.find(id);
                 if (!s) throw py::key_error(id);
                 return std::string(to_string(s->split));
             })
        .def("save", [](const Manifest& mf, const std::filesystem::path& p) { save_manifest(mf, p); })
        .def("__len__", [](const Manifest& mf) { return mf.scenes.size(); });

    m.def(
        "build_manifest", [](const std::filesystem::path& root) { return build_manifest(root); }, py::arg("root"));
    m.def("load_manifest", &load_manifest, py::arg("path"));
    m.def("split_scenes", &split_scenes, py::arg("manifest"), py::arg("seed"), py::arg("train") = 3,
          py::arg("test") = 1);
    m.def(
        "synthesize_dataset",
        [](const std::filesystem::path& source, const std::filesystem::path& out) {
            return synthesize_dataset(source, out);
        },
        py::arg("source"), py::arg("out"));

    py::class_<NdeModel>(m, "Model")
        .def(
            "infer",
            [](NdeModel& model, const Array& img) {
                const Image input = to_image(img);
                InferenceResult r;
                {
                    py::gil_scoped_release release;
                    r = model.infer(input);
                }
                py::dict d;
                d["output"] = to_array(r.output);
                d["illumination"] = to_array(r.illumination);
                d["reflectance"] = to_array(r.reflectance);
                d["enhanced"] = to_array(r.enhanced);
                d["dehazed"] = to_array(r.dehazed);
                return d;
            },
            py::arg("image"));
    m.def("load_model", &load_model, py::arg("checkpoint"));

    m.def(
        "train_stage1",
        [](const Manifest& mf, const std::filesystem::path& out, const std::string& preset,
           const std::vector<std::string>& overrides) {
            const TrainConfig cfg = make_config(preset, overrides);
            StageReport r;
            {
                py::gil_scoped_release release;
                r = train_stage1(mf, cfg, out);
            }
            return report_dict(r);
        },
        py::arg("manifest"), py::arg("out_dir"), py::arg("preset") = "desk",
        py::arg("overrides") = std::vector<std::string>{});
    m.def(
        "train_stage2",
        [](const Manifest& mf, const std::filesystem::path& stage1, const std::filesystem::path& out,
           const std::string& preset, const std::vector<std::string>& overrides) {
            const TrainConfig cfg = make_config(preset, overrides);
            StageReport r;
            {
                py::gil_scoped_release release;
                r = train_stage2(mf, cfg, stage1, out);
            }
            return report_dict(r);
        },
        py::arg("manifest"), py::arg("stage1_checkpoint"), py::arg("out_dir"), py::arg("preset") = "desk",
        py::arg("overrides") = std::vector<std::string>{});
}
