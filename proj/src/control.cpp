#include "ikd/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ikd/error.hpp"

namespace ikd {

namespace {

// Forward fan used for the stopping-distance constraint.
constexpr double kRayAngles[] = {0.0, 0.35, -0.35};

}  // namespace

std::string to_string(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::kBaseline: return "baseline";
    case ControllerMode::kAblated: return "ablated";
    case ControllerMode::kLearned: return "learned";
  }
  throw ValidationError("unknown controller mode");
}

ControllerMode parse_mode(const std::string& name) {
  if (name == "baseline") return ControllerMode::kBaseline;
  if (name == "ablated") return ControllerMode::kAblated;
  if (name == "learned") return ControllerMode::kLearned;
  throw ValidationError("unknown controller mode: " + name +
                        " (expected baseline|ablated|learned)");
}

void BaselineConfig::validate() const {
  if (num_samples < 2) throw ValidationError("baseline needs at least 2 samples");
  if (!(horizon > 0.0)) throw ValidationError("baseline horizon must be positive");
  if (!(curvature_window > 0.0)) {
    throw ValidationError("baseline curvature window must be positive");
  }
}

void VelocityScheduleConfig::validate() const {
  if (!(target_speed > 0.0) || target_speed > kMaxVelocity) {
    throw ValidationError("target speed must lie in (0, 3] m/s");
  }
  if (!(max_accel > 0.0)) throw ValidationError("max_accel must be positive");
  if (safety_distance_margin < 0.0) {
    throw ValidationError("safety distance margin must be non-negative");
  }
}

void ControllerConfig::validate() const {
  baseline.validate();
  schedule.validate();
  if (!(lookahead > 0.0)) throw ValidationError("lookahead must be positive");
  if (!(control_dt > 0.0)) throw ValidationError("control_dt must be positive");
}

double schedule_velocity(const VelocityScheduleConfig& cfg, double current_speed,
                         double distance_ahead, double control_dt) {
  const double accel_cap = current_speed + cfg.max_accel * control_dt;
  const double stop_cap =
      std::sqrt(2.0 * cfg.max_accel * std::max(0.0, distance_ahead - cfg.safety_distance_margin));
  return std::max(0.0, std::min({cfg.target_speed, accel_cap, stop_cap}));
}

std::vector<double> baseline_candidates(double center, const BaselineConfig& cfg) {
  cfg.validate();
  const double lo = std::max(-kMaxCurvature, center - cfg.curvature_window);
  const double hi = std::min(kMaxCurvature, center + cfg.curvature_window);
  const int n = cfg.num_samples;

  std::vector<double> candidates(static_cast<std::size_t>(n));
  if (lo == -hi) {
    // Mirrored construction keeps the grid exactly symmetric.
    for (int i = 0; i < n / 2; ++i) {
      const double c = lo + (hi - lo) * (static_cast<double>(i) / (n - 1));
      candidates[static_cast<std::size_t>(i)] = c;
      candidates[static_cast<std::size_t>(n - 1 - i)] = -c;
    }
    if (n % 2 == 1) candidates[static_cast<std::size_t>(n / 2)] = 0.0;
  } else {
    for (int i = 0; i < n; ++i) {
      candidates[static_cast<std::size_t>(i)] =
          lo + (hi - lo) * (static_cast<double>(i) / (n - 1));
    }
  }
  return candidates;
}

ControlInput baseline_select(const VehicleState& x, const CarrotTarget& target,
                             const BaselineConfig& cfg, double v_sched) {
  if (v_sched < 0.0) throw ValidationError("scheduled velocity must be non-negative");
  const std::vector<double> candidates = baseline_candidates(x.actuator_curvature, cfg);

  double best_c = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    const Displacement end = rollout_ideal(ControlInput(v_sched, c), cfg.horizon);
    const double ex = end.dx - target.delta_x.dx;
    const double ey = end.dy - target.delta_x.dy;
    const double d = ex * ex + ey * ey;
    if (d < best_d || (d == best_d && std::abs(c) < std::abs(best_c))) {
      best_d = d;
      best_c = c;
    }
  }
  return ControlInput(v_sched, best_c);
}

ControlInput learned_select(const ControlInput& delta_x_proxy,
                            std::span<const double> window, const ParameterSet& params) {
  if (!params.spec.use_encoder) {
    throw ControllerFault("learned controller needs the encoder model");
  }
  ModelOutput out;
  try {
    out = forward(params, delta_x_proxy.velocity, delta_x_proxy.curvature, window);
  } catch (const std::exception& e) {
    throw ControllerFault(std::string("inverse model failed: ") + e.what());
  }
  if (!std::isfinite(out.velocity) || !std::isfinite(out.curvature)) {
    throw ControllerFault("inverse model produced a non-finite command");
  }
  return ControlInput(out.velocity, out.curvature);
}

ControlInput ablated_select(const ControlInput& delta_x_proxy, const ParameterSet& params) {
  if (params.spec.use_encoder) {
    throw ControllerFault("ablated controller needs the encoder-free model");
  }
  ModelOutput out;
  try {
    out = forward(params, delta_x_proxy.velocity, delta_x_proxy.curvature);
  } catch (const std::exception& e) {
    throw ControllerFault(std::string("inverse model failed: ") + e.what());
  }
  if (!std::isfinite(out.velocity) || !std::isfinite(out.curvature)) {
    throw ControllerFault("inverse model produced a non-finite command");
  }
  return ControlInput(out.velocity, out.curvature);
}

Controller::Controller(const Track* track, const ControllerConfig& cfg,
                       const ParameterSet* params)
    : track_(track), cfg_(cfg), params_(params) {
  if (!track_) throw ValidationError("controller needs a track");
  cfg_.validate();
  if (cfg_.mode != ControllerMode::kBaseline && !params_) {
    throw ValidationError("learned and ablated modes need trained parameters");
  }
}

double Controller::boundary_distance(const VehicleState& state) const {
  double nearest = std::numeric_limits<double>::infinity();
  const Vec2 origin = state.position();
  for (double angle : kRayAngles) {
    const double a = state.heading + angle;
    const Vec2 dir{std::cos(a), std::sin(a)};
    for (const auto& polyline : track_->boundaries) {
      for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        nearest = std::min(nearest, ray_segment_hit(origin, dir, polyline[i], polyline[i + 1]));
      }
    }
  }
  return nearest;
}

ControlDecision Controller::step(const VehicleState& state, std::span<const double> window) {
  const double s = project(track_->plan, state, previous_s_);
  previous_s_ = s;
  const CarrotTarget target = carrot(track_->plan, s, state, cfg_.lookahead);
  const double distance = boundary_distance(state);
  const double v_sched =
      schedule_velocity(cfg_.schedule, state.actuator_speed, distance, cfg_.control_dt);

  ControlDecision decision;
  decision.u_baseline = baseline_select(state, target, cfg_.baseline, v_sched);
  decision.delta_x = target.delta_x;
  decision.u = decision.u_baseline;

  if (cfg_.mode != ControllerMode::kBaseline) {
    try {
      decision.u = cfg_.mode == ControllerMode::kLearned
                       ? learned_select(decision.u_baseline, window, *params_)
                       : ablated_select(decision.u_baseline, *params_);
    } catch (const ControllerFault& fault) {
      ++fault_count_;
      if (first_fault_.empty()) first_fault_ = fault.what();
      decision.u = decision.u_baseline;
    }
  }

  if (record_decisions_) {
    decisions_.push_back({state.time, cfg_.mode, decision.u_baseline, decision.u});
  }
  return decision;
}

void write_decision_csv(const std::vector<DecisionRecord>& records,
                        const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatFault("cannot open decision CSV for writing: " + path);
  os << "time,mode,v_in,c_in,v_out,c_out\n";
  char line[192];
  for (const DecisionRecord& r : records) {
    std::snprintf(line, sizeof(line), "%.6f,%s,%.9g,%.9g,%.9g,%.9g\n", r.time,
                  to_string(r.mode).c_str(), r.input.velocity, r.input.curvature,
                  r.output.velocity, r.output.curvature);
    os << line;
  }
  if (!os) throw FormatFault("failed writing decision CSV: " + path);
}

}  // namespace ikd
