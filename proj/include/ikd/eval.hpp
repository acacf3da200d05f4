#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ikd/control.hpp"
#include "ikd/nn.hpp"
#include "ikd/plan.hpp"
#include "ikd/sim.hpp"
#include "ikd/terrain.hpp"

namespace ikd {

enum class TurnOutcome : std::uint8_t { kPassed = 0, kCollision = 1, kStuck = 2 };

std::string to_string(TurnOutcome outcome);

struct TrajectoryPoint {
  double time{0.0};
  double x{0.0}, y{0.0}, heading{0.0};
  double speed{0.0}, yaw_rate{0.0};
  double cmd_v{0.0}, cmd_c{0.0};
};

struct LapResult {
  ControllerMode mode{ControllerMode::kBaseline};
  double target_speed{0.0};
  std::uint64_t seed{0};
  bool completed{false};
  bool faulted{false};
  std::string fault_reason;
  double lap_time{0.0};  // s, launch to finish, resets included
  std::vector<TurnOutcome> turn_outcomes;  // one per track gate
  int off_turn_failures{0};
  std::vector<TrajectoryPoint> trajectory;  // control-rate samples
  double mean_cross_track{0.0}, max_cross_track{0.0};  // m
  double objective_j{0.0};
};

struct EvalConfig {
  SimConfig sim;
  ControllerConfig controller;
  double footprint_radius{0.15};  // m
  double stuck_window{3.0};       // s
  double stuck_distance{0.1};     // m
  double reset_advance{0.3};      // m past the failed turn's exit gate
  double lap_timeout{300.0};      // s of simulated time before a lap faults
  double gamma{1.0};              // s/m^2, objective trade-off

  void validate() const;
};

// One lap from the plan origin. Failures reset the vehicle just past the
// failed turn's exit and the lap continues, so every gate is attempted.
LapResult run_lap(const Track& track, const TerrainField& field, ControllerMode mode,
                  double target_speed, std::uint64_t seed, const EvalConfig& cfg,
                  const ParameterSet* params);

// Eq.-style time/accuracy trade-off: lap duration plus gamma times the
// time-discretized integral of squared cross-track distance.
double objective_J(const std::vector<TrajectoryPoint>& trajectory, const GlobalPlan& plan,
                   double gamma);

struct CellStats {
  ControllerMode mode{ControllerMode::kBaseline};
  double speed{0.0};
  int laps{0};
  int faulted_laps{0};
  int turn_attempts{0};
  int failures{0};
  int collisions{0};
  int stucks{0};
  std::optional<double> failure_rate, success_rate;
  std::optional<double> mean_cross_track, mean_lap_time, mean_objective;

  bool operator==(const CellStats&) const = default;
};

struct TurnStats {
  ControllerMode mode{ControllerMode::kBaseline};
  std::string turn;
  int attempts{0};
  int failures{0};
  std::optional<double> failure_rate;

  bool operator==(const TurnStats&) const = default;
};

struct ModeStats {
  ControllerMode mode{ControllerMode::kBaseline};
  int laps{0};
  int faulted_laps{0};
  int turn_attempts{0};
  int failures{0};
  std::optional<double> success_rate;

  bool operator==(const ModeStats&) const = default;
};

struct BenchmarkReport {
  std::uint64_t base_seed{0};
  std::uint64_t world_hash{0};
  double gamma{1.0};
  int laps_per_cell{0};
  std::vector<ControllerMode> modes;
  std::vector<double> speeds;
  std::vector<CellStats> per_cell;
  std::vector<TurnStats> per_turn;
  std::vector<ModeStats> overall;

  bool operator==(const BenchmarkReport&) const = default;
};

std::string report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const std::string& text);

struct BenchmarkConfig {
  EvalConfig eval;
  std::vector<ControllerMode> modes{ControllerMode::kBaseline, ControllerMode::kAblated,
                                    ControllerMode::kLearned};
  std::vector<double> speeds{1.0, 1.5, 2.0, 2.5, 3.0};
  int laps_per_cell{10};
  std::uint64_t base_seed{1};
  int workers{1};

  void validate() const;
};

struct BenchmarkRun {
  BenchmarkReport report;
  std::vector<LapResult> laps;  // job order: mode-major, then speed, then lap
};

// Lap seeds are base_seed + speed_index * laps_per_cell + lap_index, so
// every mode sees the same seeds. Aggregation is an ordered reduction and
// the report is bit-identical for any worker count.
BenchmarkRun run_benchmark(const Track& track, const TerrainField& field,
                           const BenchmarkConfig& cfg, const ParameterSet* full_params,
                           const ParameterSet* ablated_params);

// report.json, per-lap trajectory CSVs, and per-figure rate tables under
// out_dir. Throws ValidationError on an empty lap list.
void export_report(const BenchmarkRun& run, const std::string& out_dir);

void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory,
                          const std::string& path);
std::vector<TrajectoryPoint> read_trajectory_csv(const std::string& path);

}  // namespace ikd
