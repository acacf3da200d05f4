#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ikd/nn.hpp"
#include "ikd/plan.hpp"
#include "ikd/sim.hpp"

namespace ikd {

enum class ControllerMode : std::uint8_t { kBaseline = 0, kAblated = 1, kLearned = 2 };

std::string to_string(ControllerMode mode);
// Accepts "baseline", "ablated", "learned"; throws ValidationError otherwise.
ControllerMode parse_mode(const std::string& name);

struct BaselineConfig {
  int num_samples{100};
  double horizon{0.5};            // s, ideal-rollout lookahead
  double curvature_window{2.7};   // 1/m, half-width around current curvature
  void validate() const;
};

struct VelocityScheduleConfig {
  double target_speed{2.0};           // m/s
  double max_accel{4.0};              // m/s^2
  double safety_distance_margin{0.3}; // m
  void validate() const;
};

struct ControlDecision {
  ControlInput u;
  ControlInput u_baseline;
  Displacement delta_x;  // robot-frame carrot displacement the decision used
};

// Fastest speed respecting the acceleration limit and the stopping
// distance to the nearest boundary ahead.
double schedule_velocity(const VelocityScheduleConfig& cfg, double current_speed,
                         double distance_ahead, double control_dt);

// Curvatures evaluated by the sampling baseline: num_samples values evenly
// spaced over the feasible band around `center`, clipped to actuator
// limits. Symmetric bands are mirrored exactly around zero.
std::vector<double> baseline_candidates(double center, const BaselineConfig& cfg);

// Ideal-rollout sampling MPC: picks the candidate curvature whose
// constant-curvature endpoint lands nearest the carrot, ties toward
// smaller |c|. Returned velocity is v_sched.
ControlInput baseline_select(const VehicleState& x, const CarrotTarget& target,
                             const BaselineConfig& cfg, double v_sched);

// Learned inverse model applied to the baseline's proxy for the desired
// state change. Output clamped to actuator limits. Throws ControllerFault
// on unusable parameters or a non-finite result.
ControlInput learned_select(const ControlInput& delta_x_proxy,
                            std::span<const double> window, const ParameterSet& params);

// Ablation without the observation window.
ControlInput ablated_select(const ControlInput& delta_x_proxy, const ParameterSet& params);

struct ControllerConfig {
  ControllerMode mode{ControllerMode::kBaseline};
  BaselineConfig baseline;
  VelocityScheduleConfig schedule;
  double lookahead{1.0};    // m
  double control_dt{0.05};  // s
  void validate() const;
};

// Per-step decision log row.
struct DecisionRecord {
  double time{0.0};
  ControllerMode mode{ControllerMode::kBaseline};
  ControlInput input;   // u_B
  ControlInput output;  // issued command
};

// One vehicle's control stack: projection with memory, carrot, velocity
// scheduling, baseline sampling, optional learned correction with
// fall-back. Pure given (state, window); owns only the projection memory.
class Controller {
 public:
  // track must outlive the controller; params may be null for baseline.
  Controller(const Track* track, const ControllerConfig& cfg, const ParameterSet* params);

  ControlDecision step(const VehicleState& state, std::span<const double> window);

  // Most recent plan projection, as progress in [0, 1).
  double current_progress() const { return previous_s_; }
  void reset_progress(double s) { previous_s_ = s; }

  // Ray-cast distance to the nearest boundary ahead of the state.
  double boundary_distance(const VehicleState& state) const;

  int fault_count() const { return fault_count_; }
  const std::string& first_fault() const { return first_fault_; }

  const std::vector<DecisionRecord>& decisions() const { return decisions_; }
  void set_record_decisions(bool on) { record_decisions_ = on; }

 private:
  const Track* track_;
  ControllerConfig cfg_;
  const ParameterSet* params_;
  double previous_s_{0.0};
  int fault_count_{0};
  std::string first_fault_;
  bool record_decisions_{false};
  std::vector<DecisionRecord> decisions_;
};

// `time,mode,v_in,c_in,v_out,c_out` rows.
void write_decision_csv(const std::vector<DecisionRecord>& records, const std::string& path);

}  // namespace ikd
