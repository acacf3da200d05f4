#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ikd/control.hpp"
#include "ikd/data.hpp"
#include "ikd/error.hpp"
#include "ikd/eval.hpp"
#include "ikd/nn.hpp"
#include "ikd/sim.hpp"
#include "ikd/world_io.hpp"

namespace py = pybind11;

namespace {

ikd::Dataset collect_py(const ikd::World& world, double duration, std::uint64_t seed,
                        std::pair<double, double> arena_center, double arena_radius) {
  ikd::SimConfig sim;
  sim.rng_seed = seed + 1;
  ikd::ExplorationPolicy policy;
  policy.rng_seed = seed;
  policy.arena_center = {arena_center.first, arena_center.second};
  policy.arena_radius = arena_radius;
  return ikd::collect(world.terrain, sim, policy, duration);
}

py::array_t<float> dataset_labels(const ikd::Dataset& d) {
  py::array_t<float> out({d.size(), static_cast<std::size_t>(4)});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < d.size(); ++i) {
    view(i, 0) = d.samples[i].v_r;
    view(i, 1) = d.samples[i].c_r;
    view(i, 2) = d.samples[i].v_cmd;
    view(i, 3) = d.samples[i].c_cmd;
  }
  return out;
}

py::array_t<float> dataset_windows(const ikd::Dataset& d) {
  py::array_t<float> out({d.size(), static_cast<std::size_t>(ikd::kWindowDim)});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int k = 0; k < ikd::kWindowDim; ++k) view(i, k) = d.samples[i].window[k];
  }
  return out;
}

ikd::TrainResult train_py(const ikd::Dataset& dataset, bool ablated, int epochs,
                          double learning_rate, int batch_size, std::uint64_t seed) {
  const ikd::NetworkSpec spec =
      ablated ? ikd::NetworkSpec::ablated() : ikd::NetworkSpec::full();
  ikd::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = learning_rate;
  cfg.batch_size = batch_size;
  cfg.rng_seed = seed;
  return ikd::train(dataset, spec, ikd::LossWeights{}, cfg);
}

std::pair<double, double> forward_py(const ikd::ParameterSet& params, double v_r, double c_r,
                                     std::optional<py::array_t<double>> window) {
  ikd::ModelOutput out;
  if (window) {
    py::buffer_info info = window->request();
    const auto* data = static_cast<const double*>(info.ptr);
    out = ikd::forward(params, v_r, c_r,
                       std::span<const double>(data, static_cast<std::size_t>(info.size)));
  } else {
    out = ikd::forward(params, v_r, c_r);
  }
  return {out.velocity, out.curvature};
}

std::string benchmark_py(const ikd::World& world, const ikd::ParameterSet* full,
                         const ikd::ParameterSet* ablated,
                         const std::vector<std::string>& modes,
                         const std::vector<double>& speeds, int laps_per_cell,
                         std::uint64_t seed, int workers) {
  ikd::BenchmarkConfig cfg;
  cfg.modes.clear();
  for (const std::string& m : modes) cfg.modes.push_back(ikd::parse_mode(m));
  cfg.speeds = speeds;
  cfg.laps_per_cell = laps_per_cell;
  cfg.base_seed = seed;
  cfg.workers = workers;
  const ikd::BenchmarkRun run = ikd::run_benchmark(world.track, world.terrain, cfg, full, ablated);
  return ikd::report_to_json(run.report);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "terrain-aware inverse kinodynamic navigation benchmark core";

  py::register_exception<ikd::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ikd::FormatFault>(m, "FormatFault", PyExc_ValueError);

  py::class_<ikd::World>(m, "World")
      .def_property_readonly("num_patches",
                             [](const ikd::World& w) { return w.terrain.patches.size(); })
      .def_property_readonly("num_turn_gates",
                             [](const ikd::World& w) { return w.track.turn_gates.size(); })
      .def_property_readonly("plan_length",
                             [](const ikd::World& w) { return w.track.plan.total_length(); });

  py::class_<ikd::Dataset>(m, "Dataset")
      .def("__len__", [](const ikd::Dataset& d) { return d.size(); })
      .def("labels", &dataset_labels, "per-sample [v_r, c_r, v_cmd, c_cmd] as float32")
      .def("windows", &dataset_windows, "per-sample flattened IMU windows");

  py::class_<ikd::ParameterSet>(m, "ParameterSet")
      .def_property_readonly("use_encoder",
                             [](const ikd::ParameterSet& p) { return p.spec.use_encoder; })
      .def_property_readonly("train_seed",
                             [](const ikd::ParameterSet& p) { return p.train_seed; });

  py::class_<ikd::TrainResult>(m, "TrainResult")
      .def_readonly("params", &ikd::TrainResult::params)
      .def_readonly("best_epoch", &ikd::TrainResult::best_epoch)
      .def_readonly("wall_seconds", &ikd::TrainResult::wall_seconds)
      .def("curve", [](const ikd::TrainResult& r) {
        std::vector<std::tuple<int, double, double>> out;
        for (const ikd::EpochStats& e : r.curve) {
          out.emplace_back(e.epoch, e.train_loss, e.val_loss);
        }
        return out;
      });

  m.def("load_world", &ikd::load_world, py::arg("path"));
  m.def("parse_world", &ikd::parse_world, py::arg("text"));
  m.def("world_to_json", &ikd::world_to_json, py::arg("world"));
  m.def("validate_world", &ikd::validate_world, py::arg("world"));
  m.def("world_hash", &ikd::world_hash, py::arg("world"));

  m.def("collect", &collect_py, py::arg("world"), py::arg("duration"), py::arg("seed") = 0,
        py::arg("arena_center") = std::pair<double, double>{0.0, 0.0},
        py::arg("arena_radius") = 0.0);
  m.def("save_dataset", &ikd::save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &ikd::load_dataset, py::arg("path"));

  m.def("train", &train_py, py::arg("dataset"), py::arg("ablated") = false,
        py::arg("epochs") = 50, py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 64,
        py::arg("seed") = 0);
  m.def("save_params", &ikd::save_params, py::arg("params"), py::arg("path"));
  m.def("load_params", &ikd::load_params, py::arg("path"));
  m.def("forward", &forward_py, py::arg("params"), py::arg("v_r"), py::arg("c_r"),
        py::arg("window") = std::nullopt);
  m.def("grad_check",
        [](bool ablated, std::uint64_t seed, int draws) {
          const ikd::NetworkSpec spec =
              ablated ? ikd::NetworkSpec::ablated() : ikd::NetworkSpec::full();
          return ikd::grad_check(spec, seed, draws);
        },
        py::arg("ablated") = false, py::arg("seed") = 0, py::arg("draws") = 120);

  m.def("run_benchmark", &benchmark_py, py::arg("world"), py::arg("full_params") = nullptr,
        py::arg("ablated_params") = nullptr,
        py::arg("modes") = std::vector<std::string>{"baseline"},
        py::arg("speeds") = std::vector<double>{1.0, 1.5, 2.0}, py::arg("laps_per_cell") = 2,
        py::arg("seed") = 1, py::arg("workers") = 1);
}
