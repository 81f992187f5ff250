#include "flamesense/baseline.hpp"
#include "flamesense/commands.hpp"
#include "flamesense/dataset.hpp"
#include "flamesense/error.hpp"
#include "flamesense/eval.hpp"
#include "flamesense/flame_model.hpp"
#include "flamesense/pipeline.hpp"
#include "flamesense/similarity.hpp"
#include "flamesense/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

namespace py = pybind11;
using namespace flamesense;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RgbImage to_image(const ImageArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an (rows, cols, 3) uint8 array");
    RgbImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    static_assert(sizeof(Pixel) == 3);
    std::memcpy(img.pixels().data(), a.data(), static_cast<std::size_t>(a.size()));
    return img;
}

ImageArray to_array(const RgbImage& img) {
    ImageArray a({py::ssize_t(img.rows()), py::ssize_t(img.cols()), py::ssize_t(3)});
    std::memcpy(a.mutable_data(), img.pixels().data(), img.pixels().size() * 3);
    return a;
}

GridSpec to_grid(std::pair<int, int> g) { return GridSpec{g.first, g.second}; }

std::vector<double> array_values(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Flame-image soft sensor for the excess air coefficient.";

    static py::exception<Error> error(m, "FlamesenseError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    m.def("read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); }, py::arg("path"));
    m.def("write_png", [](const std::filesystem::path& p, const ImageArray& a) { write_png(p, to_image(a)); },
          py::arg("path"), py::arg("image"));

    m.def("pdf_uni", &pdf_uni, py::arg("x"), py::arg("mu"), py::arg("sigma"));

    py::class_<IdealFlameModel>(m, "IdealFlameModel")
        .def_static(
            "fit",
            [](const std::vector<ImageArray>& frames, const std::vector<double>& lambdas) {
                std::vector<RgbImage> imgs;
                for (const auto& f : frames) imgs.push_back(to_image(f));
                return fit_ideal_model(imgs, lambdas);
            },
            py::arg("frames"), py::arg("lambdas"))
        .def_static("load", &load_model, py::arg("path"))
        .def("save", [](const IdealFlameModel& mdl, const std::filesystem::path& p) { save_model(mdl, p); })
        .def_property_readonly("frame_count", [](const IdealFlameModel& mdl) { return mdl.frame_count; })
        .def_property_readonly("degenerate", &IdealFlameModel::degenerate)
        .def("stats",
             [](const IdealFlameModel& mdl, const std::string& channel) {
                 const auto& s = mdl.stats_for(parse_channels(channel).at(0));
                 return std::make_pair(s.mean, s.stddev);
             },
             py::arg("channel"), "(mean, stddev) of one channel")
        .def("cov",
             [](const IdealFlameModel& mdl, const std::string& channels) {
                 return mdl.cov_for(subset_for(parse_channels(channels))).entries;
             },
             py::arg("channels"));

    m.def(
        "extract_features",
        [](const ImageArray& img, const IdealFlameModel& model, const std::string& method, const std::string& channels,
           std::optional<std::vector<double>> weights, std::pair<int, int> grid) {
            const auto chans = parse_channels(channels);
            std::optional<GmmWeights> w;
            if (weights) {
                std::string text;
                for (double v : *weights) text += (text.empty() ? "" : ",") + std::to_string(v);
                w = parse_weights(text, chans);
            }
            const auto fv = extract_features(to_image(img), model, parse_method(method), chans, w, to_grid(grid));
            return py::array_t<double>(static_cast<py::ssize_t>(fv.values.size()), fv.values.data());
        },
        py::arg("image"), py::arg("model"), py::arg("method") = "sumsim", py::arg("channels") = "RGB",
        py::arg("weights") = py::none(), py::arg("grid") = std::make_pair(16, 16));

    m.def(
        "baseline_features",
        [](const std::string& name, const ImageArray& img) {
            const auto v = baseline_features(parse_baseline(name), to_image(img));
            return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
        },
        py::arg("name"), py::arg("image"));

    m.def(
        "gmm_weight_grid",
        [](const std::string& channels) {
            std::vector<std::vector<double>> out;
            for (const auto& w : gmm_weight_grid(parse_channels(channels))) out.push_back(w.weights);
            return out;
        },
        py::arg("channels"));

    m.def(
        "mse", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                  const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return mse(array_values(a), array_values(b));
        },
        py::arg("targets"), py::arg("predictions"));
    m.def(
        "pearson_r", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                        const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return pearson_r(array_values(a), array_values(b));
        },
        py::arg("targets"), py::arg("predictions"));

    m.def(
        "split",
        [](std::size_t count, std::uint64_t seed) {
            const auto s = split(count, SplitSpec{0.70, 0.15, 0.15, seed});
            return py::make_tuple(s.train, s.validation, s.test);
        },
        py::arg("count"), py::arg("seed") = 0, "(train, validation, test) index lists");

    m.def(
        "cubic_interp",
        [](const std::vector<double>& t, const std::vector<double>& lambda, const std::vector<double>& query) {
            LambdaLog log;
            for (std::size_t i = 0; i < t.size() && i < lambda.size(); ++i) log.entries.push_back({t[i], lambda[i]});
            const auto spline = make_lambda_spline(log);
            std::vector<double> out;
            for (double q : query) out.push_back(spline(q));
            return out;
        },
        py::arg("timestamps"), py::arg("lambdas"), py::arg("query"));

    m.def(
        "fit",
        [](const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const std::string& trainer,
           std::uint64_t seed, int max_epochs, int patience) {
            TrainConfig cfg;
            cfg.method = parse_trainer(trainer);
            cfg.seed = seed;
            cfg.max_epochs = max_epochs;
            cfg.patience = patience;
            cfg.validate();
            const auto run = fit_once(features, targets, cfg, seed);
            py::dict d;
            d["predictions"] = run.predictions;
            d["train"] = run.split.train;
            d["validation"] = run.split.validation;
            d["test"] = run.split.test;
            d["train_cost"] = run.report.train_cost;
            d["validation_cost"] = run.report.validation_cost;
            d["epochs"] = run.report.epochs;
            d["best_epoch"] = run.report.best_epoch;
            d["stop"] = std::string(stop_reason_name(run.report.stop));
            return d;
        },
        py::arg("features"), py::arg("targets"), py::arg("trainer") = "scg", py::arg("seed") = 0,
        py::arg("max_epochs") = 1000, py::arg("patience") = 6,
        "Split, standardise, initialise and train once; predictions cover every sample.");

    py::class_<TrainedModel>(m, "TrainedModel")
        .def_static("load", &load_trained_model, py::arg("path"))
        .def_property_readonly("features", [](const TrainedModel& t) {
            return t.spec.method_label() + ":" + t.spec.channel_label();
        })
        .def_property_readonly("trainer", [](const TrainedModel& t) { return std::string(trainer_name(t.trainer)); })
        .def("predict_image", [](const TrainedModel& t, const ImageArray& img) { return t.predict_image(to_image(img)); },
             py::arg("image"));

    m.def(
        "render_frame",
        [](double lambda, int image_size, double noise, std::uint64_t seed, std::uint64_t noise_seed) {
            RigConfig rig;
            rig.image_size = image_size;
            rig.noise = noise;
            rig.seed = seed;
            rig.validate();
            return to_array(render_frame(rig, lambda, noise_seed));
        },
        py::arg("lam"), py::arg("image_size") = 128, py::arg("noise") = 4.0, py::arg("seed") = 1,
        py::arg("noise_seed") = 0);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run one command-line invocation; returns (exit_code, stdout, stderr).");
}
