#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hiclr/contrastive.hpp"
#include "hiclr/error.hpp"
#include "hiclr/experiment.hpp"

namespace py = pybind11;
using namespace hiclr;
using nlohmann::json;

namespace {

// Configs cross the boundary as JSON text; the Python side wraps them in dicts.
ExperimentConfig parse_config(const std::string& text) {
    try {
        return experiment_config_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, e.what());
    }
}

py::tuple dataset_arrays(const Dataset& d) {
    require(!d.sequences.empty(), ErrorKind::empty_input, "empty dataset");
    const auto& first = d.sequences.front();
    py::array_t<float> data({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(first.channels),
                             static_cast<py::ssize_t>(first.frames), static_cast<py::ssize_t>(first.joints),
                             static_cast<py::ssize_t>(first.persons)});
    py::array_t<int> labels(static_cast<py::ssize_t>(d.size()));
    float* out = data.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& s = d.sequences[i];
        require(s.same_shape(first), ErrorKind::shape, "sequences differ in shape");
        std::copy(s.data.begin(), s.data.end(), out + i * s.data.size());
        labels.mutable_at(static_cast<py::ssize_t>(i)) = s.label.value_or(-1);
    }
    return py::make_tuple(data, labels);
}

}  // namespace

PYBIND11_MODULE(_hiclr, m) {
    m.doc() = "Core of the hiclr package";

    static py::exception<Error> error(m, "HiclrError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object kind = py::str(to_string(e.kind()));
            PyErr_SetObject(error.ptr(), py::make_tuple(py::str(e.what()), kind).ptr());
        }
    });

    m.def("default_config", [] { return to_json(ExperimentConfig{}).dump(); });
    m.def("benchmark_config", [] { return to_json(synthetic_benchmark_config()).dump(); });
    m.def("resolve_config", [](const std::string& text) {
        ExperimentConfig c = parse_config(text);
        c.validate();
        return to_json(c).dump();
    });

    m.def("load_data", [](const std::string& text) {
        auto [train, test] = load_experiment_data(parse_config(text).dataset);
        return py::make_tuple(dataset_arrays(train), dataset_arrays(test));
    });

    m.def(
        "synth",
        [](const std::string& spec_text, std::uint64_t seed, double test_fraction, std::uint64_t split_seed,
           const std::filesystem::path& out) {
            return cmd_synth(synth_spec_from_json(json::parse(spec_text)), seed, test_fraction, split_seed, out);
        },
        py::arg("spec"), py::arg("seed"), py::arg("test_fraction"), py::arg("split_seed"), py::arg("out"));

    m.def(
        "pretrain",
        [](const std::string& text, bool resume) {
            PretrainControls controls;
            controls.resume = resume;
            std::vector<PretrainRun> runs;
            {
                py::gil_scoped_release release;
                runs = cmd_pretrain(parse_config(text), controls);
            }
            py::list out;
            for (const auto& r : runs) {
                py::dict d;
                d["stream"] = to_string(r.stream);
                d["checkpoint"] = r.checkpoint;
                d["log"] = r.log;
                d["steps"] = r.steps;
                d["final_loss"] = r.final_loss.total;
                d["epoch_loss"] = r.epoch_loss;
                out.append(d);
            }
            return out;
        },
        py::arg("config"), py::arg("resume") = false);

    m.def(
        "evaluate",
        [](const std::string& text, const std::filesystem::path& run_dir, const std::filesystem::path& checkpoint) {
            EvalOutput out;
            {
                py::gil_scoped_release release;
                out = cmd_eval(parse_config(text), EvalInputs{run_dir, checkpoint});
            }
            py::list reports;
            for (const auto& r : out.reports) reports.append(to_json(r).dump());
            return reports;
        },
        py::arg("config"), py::arg("run_dir") = std::filesystem::path{},
        py::arg("checkpoint") = std::filesystem::path{});

    m.def("plot", &cmd_plot, py::arg("run_dirs"), py::arg("out"));

    m.def(
        "info_nce",
        [](const Eigen::VectorXd& z, const Eigen::VectorXd& z_pos, const RowMatrix& negatives, double tau) {
            return info_nce(z, z_pos, negatives, tau);
        },
        py::arg("z"), py::arg("z_pos"), py::arg("negatives"), py::arg("tau"));
    m.def("conditional_distribution", &conditional_distribution, py::arg("z_i"), py::arg("z_key"),
          py::arg("negatives"), py::arg("tau"));
    m.def(
        "hierarchical_loss",
        [](const std::vector<Eigen::VectorXd>& z, const Eigen::VectorXd& z_key, const RowMatrix& negatives,
           double tau, const std::string& sim) {
            const HierarchicalLoss h = hierarchical_loss(z, z_key, negatives, tau, parse_sim_function(sim));
            return py::make_tuple(h.value, h.per_branch, h.grads);
        },
        py::arg("z"), py::arg("z_key"), py::arg("negatives"), py::arg("tau"), py::arg("sim") = "kl");
}
