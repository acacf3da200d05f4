#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ikd/geometry.hpp"
#include "ikd/sim.hpp"

namespace ikd {

// Piecewise-linear global plan over a unitless progress variable s in
// [0, 1] mapped affinely to arclength. Waypoints are densified on
// construction for projection accuracy.
class GlobalPlan {
 public:
  // Throws ValidationError on fewer than 2 waypoints, repeated consecutive
  // waypoints, or a degenerate total length.
  GlobalPlan(std::vector<Vec2> waypoints, bool closed,
             double max_segment_length = 0.05);

  bool closed() const { return closed_; }
  double total_length() const { return total_length_; }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& cumulative_arclength() const { return cumulative_; }

  // Point at the given arclength (wrapped when closed, clamped when open).
  Vec2 point_at_arclength(double arclength) const;
  // Tangent heading at the given arclength.
  double heading_at_arclength(double arclength) const;

  Vec2 point_at_progress(double s) const { return point_at_arclength(s * total_length_); }

 private:
  std::vector<Vec2> points_;      // densified, includes closing point when closed
  std::vector<double> cumulative_;
  bool closed_{false};
  double total_length_{0.0};
};

struct CarrotTarget {
  Vec2 target_point;        // world frame
  Displacement delta_x;     // target pose minus robot pose, robot frame
  double progress_s{0.0};   // in [0, 1]
};

// Arclength of the forward search window used by the projection operator
// when a previous projection is known.
inline constexpr double kProjectionWindow = 5.0;  // m

// Progress of the plan point nearest to the robot. When previous_s is
// given the search is restricted to the forward window
// [previous_s, previous_s + window] of arclength (wrapping on closed
// plans). Ties break towards larger s.
double project(const GlobalPlan& plan, const VehicleState& x,
               std::optional<double> previous_s = std::nullopt,
               double window = kProjectionWindow);

// Receding-horizon target at arclength(s) + lookahead, expressed both in
// the world frame and as a robot-frame displacement.
CarrotTarget carrot(const GlobalPlan& plan, double s, const VehicleState& x,
                    double lookahead = 1.0);

struct TurnGate {
  std::string label;
  Vec2 entry_a, entry_b;  // entry gate segment
  Vec2 exit_a, exit_b;    // exit gate segment
};

// Evaluation track: plan, boundary obstacles, and labeled turn gates.
struct Track {
  GlobalPlan plan;
  std::vector<std::vector<Vec2>> boundaries;  // polyline obstacles
  std::vector<TurnGate> turn_gates;

  // Progress values where each gate segment crosses the plan, one pair per
  // gate in gate order. Throws ValidationError unless every gate segment
  // intersects the plan exactly once.
  struct GateProgress {
    double entry_s{0.0};
    double exit_s{0.0};
  };
  std::vector<GateProgress> gate_progress() const;
};

// Progress where segment [a, b] crosses the plan; throws ValidationError
// unless the crossing count is exactly one.
double gate_crossing_progress(const GlobalPlan& plan, const Vec2& a, const Vec2& b);

// Content hash over plan geometry, boundaries, and gates, for provenance.
std::uint64_t track_hash(const Track& track);

}  // namespace ikd
