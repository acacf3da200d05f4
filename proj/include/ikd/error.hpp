#pragma once

#include <stdexcept>
#include <string>

namespace ikd {

// Invalid numeric state or inputs inside the simulator.
struct SimulationFault : std::runtime_error {
  explicit SimulationFault(const std::string& what) : std::runtime_error(what) {}
};

// Unusable model parameters or a failed model query.
struct ControllerFault : std::runtime_error {
  explicit ControllerFault(const std::string& what) : std::runtime_error(what) {}
};

// Diverged or otherwise unusable training run.
struct TrainingFault : std::runtime_error {
  explicit TrainingFault(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content (datasets, parameters, world files, configs).
struct FormatFault : std::runtime_error {
  explicit FormatFault(const std::string& what) : std::runtime_error(what) {}
};

// A world or configuration that violates a documented invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ikd
