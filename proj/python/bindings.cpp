#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>

#include "macc/config.hpp"
#include "macc/error.hpp"
#include "macc/lhs.hpp"
#include "macc/pipeline.hpp"
#include "macc/simulator.hpp"
#include "macc/surrogate.hpp"

namespace py = pybind11;
namespace pl = macc::pipeline;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
    Array a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

macc::ExperimentConfig load_config(const std::string& config) {
    return config.empty() ? macc::ExperimentConfig{} : macc::parse_config(config);
}

pl::RunContext context(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
                       unsigned threads) {
    pl::RunContext ctx;
    ctx.config = load_config(config);
    ctx.seed = seed.value_or(ctx.config.dataset.seed);
    ctx.out = out;
    ctx.threads = std::max(1u, threads);
    return ctx;
}

const std::map<std::string, void (*)(const pl::RunContext&)>& stage_table() {
    static const std::map<std::string, void (*)(const pl::RunContext&)> table{
        {"generate-data", pl::generate_data},
        {"train-ae", pl::train_ae},
        {"train-inverse", pl::train_inverse},
        {"train-surrogate", pl::train_surrogate},
        {"train-baseline", pl::train_baseline},
        {"evaluate", [](const pl::RunContext& c) { pl::evaluate(c); }},
        {"scan-test", [](const pl::RunContext& c) { pl::scan_test(c); }},
        {"perturb-test", [](const pl::RunContext& c) { pl::perturb_test(c); }},
        {"sweep", [](const pl::RunContext& c) { pl::sweep(c); }},
    };
    return table;
}

py::dict simulate(const Array& x, std::size_t image_size) {
    macc::SimShape shape;
    shape.height = shape.width = image_size;
    shape.validate();
    if (x.ndim() != 1 || std::size_t(x.shape(0)) != shape.d_in)
        throw macc::ShapeError("simulate: x must be a vector of length " + std::to_string(shape.d_in));
    auto s = macc::simulate({x.data(), shape.d_in}, shape);
    py::dict out;
    out["images"] = to_array(s.images, {py::ssize_t(shape.n_band), py::ssize_t(shape.height), py::ssize_t(shape.width)});
    out["scalars"] = to_array(s.scalars, {py::ssize_t(shape.n_sca)});
    return out;
}

/// Surrogate outputs D(F(x)) in simulator units for each row of x.
py::dict predict(const std::string& out, const Array& x, const std::string& config) {
    auto ctx = context(config, std::nullopt, out, 1);
    const auto shape = ctx.config.arch().shape;
    if (x.ndim() != 2 || std::size_t(x.shape(1)) != shape.d_in)
        throw macc::ShapeError("predict: x must have shape (n, " + std::to_string(shape.d_in) + ")");
    const auto n = std::size_t(x.shape(0));
    for (py::ssize_t i = 0; i < x.size(); ++i)
        if (!(x.data()[i] >= 0.0 && x.data()[i] <= 1.0)) throw macc::Error("predict: inputs must lie in [0, 1]");

    const auto stats = pl::load_datasets(ctx).first.stats;
    const auto f = pl::load_forward(ctx);
    const auto wae = pl::load_wae(ctx);
    std::vector<double> images, scalars;
    {
        macc::NoGradGuard guard;
        auto y = macc::predict_outputs(f, wae.decoder, macc::Tensor({n, shape.d_in}, std::vector<double>(x.data(), x.data() + x.size())));
        const auto img = y.images.data(), sca = y.scalars.data();
        for (std::size_t i = 0; i < n; ++i) {
            macc::Sample s;
            s.images.assign(img.begin() + i * shape.image_size(), img.begin() + (i + 1) * shape.image_size());
            s.scalars.assign(sca.begin() + i * shape.n_sca, sca.begin() + (i + 1) * shape.n_sca);
            auto raw = macc::denormalize(s, stats);
            images.insert(images.end(), raw.images.begin(), raw.images.end());
            scalars.insert(scalars.end(), raw.scalars.begin(), raw.scalars.end());
        }
    }
    py::dict result;
    result["images"] = to_array(images, {py::ssize_t(n), py::ssize_t(shape.n_band), py::ssize_t(shape.height),
                                         py::ssize_t(shape.width)});
    result["scalars"] = to_array(scalars, {py::ssize_t(n), py::ssize_t(shape.n_sca)});
    return result;
}

}  // namespace

PYBIND11_MODULE(_macc, m) {
    m.doc() = "Bindings for the MaCC surrogate pipeline";

    auto error = py::register_exception<macc::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<macc::ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<macc::MissingArtifactError>(m, "MissingArtifactError", error.ptr());

    m.def("simulate", &simulate, py::arg("x"), py::arg("image_size") = 32,
          "Run the synthetic simulator on one input in [0,1]^5.");
    m.def(
        "lhs_sample",
        [](std::size_t n, std::size_t d, std::uint64_t seed) {
            return to_array(macc::lhs_sample(n, d, seed), {py::ssize_t(n), py::ssize_t(d)});
        },
        py::arg("n"), py::arg("d"), py::arg("seed"), "Latin hypercube design of n points in [0,1]^d.");
    m.def(
        "config_hash", [](const std::string& text) { return macc::parse_config_text(text).hash(); }, py::arg("text"),
        "Hash of the canonical form of a config text.");
    m.def(
        "canonical_config", [](const std::string& text) { return macc::parse_config_text(text).canonical(); },
        py::arg("text"), "Sorted, fully populated config text.");
    m.def("stages", [] {
        std::vector<std::string> names;
        for (const auto& [name, fn] : stage_table()) names.push_back(name);
        return names;
    });
    m.def(
        "run_stage",
        [](const std::string& stage, const std::string& out, const std::string& config,
           std::optional<std::uint64_t> seed, unsigned threads) {
            auto it = stage_table().find(stage);
            if (it == stage_table().end()) throw macc::ConfigError("unknown stage '" + stage + "'");
            auto ctx = context(config, seed, out, threads);
            py::gil_scoped_release release;
            it->second(ctx);
        },
        py::arg("stage"), py::arg("out"), py::arg("config") = "", py::arg("seed") = py::none(),
        py::arg("threads") = 1, "Run one pipeline stage, as the CLI subcommand of the same name does.");
    m.def("predict", &predict, py::arg("out"), py::arg("x"), py::arg("config") = "",
          "Surrogate predictions for the rows of x from a trained run directory.");
}
