#include "ikd/plan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ikd/error.hpp"
#include "ikd/hash.hpp"

namespace ikd {

GlobalPlan::GlobalPlan(std::vector<Vec2> waypoints, bool closed, double max_segment_length)
    : closed_(closed) {
  if (waypoints.size() < 2) throw ValidationError("plan needs at least 2 waypoints");
  for (size_t i = 0; i + 1 < waypoints.size(); ++i) {
    if ((waypoints[i + 1] - waypoints[i]).norm_sq() == 0.0) {
      throw ValidationError("plan has repeated consecutive waypoints");
    }
  }
  if (max_segment_length <= 0.0) throw ValidationError("max_segment_length must be positive");

  // For a closed plan the segment back to the start is part of the loop.
  std::vector<Vec2> nodes = std::move(waypoints);
  if (closed_) {
    if ((nodes.back() - nodes.front()).norm_sq() > 0.0) nodes.push_back(nodes.front());
  }

  points_.push_back(nodes.front());
  cumulative_.push_back(0.0);
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    const Vec2 a = nodes[i];
    const Vec2 b = nodes[i + 1];
    const double len = (b - a).norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / max_segment_length)));
    for (int k = 1; k <= pieces; ++k) {
      const double t = static_cast<double>(k) / pieces;
      points_.push_back(a + (b - a) * t);
      cumulative_.push_back(cumulative_.back() + len / pieces);
    }
  }
  total_length_ = cumulative_.back();
  if (total_length_ <= 0.0) throw ValidationError("plan has zero length");
}

namespace {

// Segment index such that cumulative[i] <= arclength <= cumulative[i+1].
size_t segment_index(const std::vector<double>& cumulative, double arclength) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), arclength);
  size_t i = static_cast<size_t>(it - cumulative.begin());
  if (i > 0) --i;
  return std::min(i, cumulative.size() - 2);
}

}  // namespace

Vec2 GlobalPlan::point_at_arclength(double arclength) const {
  double a = arclength;
  if (closed_) {
    a = std::fmod(a, total_length_);
    if (a < 0.0) a += total_length_;
  } else {
    a = std::clamp(a, 0.0, total_length_);
  }
  const size_t i = segment_index(cumulative_, a);
  const double seg_len = cumulative_[i + 1] - cumulative_[i];
  const double t = seg_len > 0.0 ? (a - cumulative_[i]) / seg_len : 0.0;
  return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double GlobalPlan::heading_at_arclength(double arclength) const {
  double a = arclength;
  if (closed_) {
    a = std::fmod(a, total_length_);
    if (a < 0.0) a += total_length_;
  } else {
    a = std::clamp(a, 0.0, total_length_);
  }
  const size_t i = segment_index(cumulative_, a);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

double project(const GlobalPlan& plan, const VehicleState& x,
               std::optional<double> previous_s, double window) {
  const auto& pts = plan.points();
  const auto& cum = plan.cumulative_arclength();
  const double total = plan.total_length();
  const Vec2 p = x.position();

  // Arclength intervals the search is allowed to touch. Without a previous
  // projection the whole plan is searched.
  struct Interval {
    double lo, hi;
  };
  std::vector<Interval> allowed;
  if (!previous_s) {
    allowed.push_back({0.0, total});
  } else {
    const double w0 = std::clamp(*previous_s, 0.0, 1.0) * total;
    const double w1 = w0 + window;
    if (plan.closed()) {
      if (w1 - w0 >= total) {
        allowed.push_back({0.0, total});
      } else if (w1 <= total) {
        allowed.push_back({w0, w1});
      } else {
        allowed.push_back({w0, total});
        allowed.push_back({0.0, w1 - total});
      }
    } else {
      allowed.push_back({w0, std::min(w1, total)});
    }
  }

  double best_d = std::numeric_limits<double>::infinity();
  double best_s = previous_s.value_or(0.0);
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double lo = cum[i];
    const double hi = cum[i + 1];
    const double seg_len = hi - lo;
    if (seg_len <= 0.0) continue;
    for (const Interval& iv : allowed) {
      const double a0 = std::max(lo, iv.lo);
      const double a1 = std::min(hi, iv.hi);
      if (a0 > a1) continue;
      const double t_lo = (a0 - lo) / seg_len;
      const double t_hi = (a1 - lo) / seg_len;
      const double t = std::clamp(closest_point_param(p, pts[i], pts[i + 1]), t_lo, t_hi);
      const Vec2 q = pts[i] + (pts[i + 1] - pts[i]) * t;
      const double d = (p - q).norm_sq();
      const double s = (lo + t * seg_len) / total;
      if (d < best_d || (d == best_d && s > best_s)) {
        best_d = d;
        best_s = s;
      }
    }
  }
  return best_s;
}

CarrotTarget carrot(const GlobalPlan& plan, double s, const VehicleState& x,
                    double lookahead) {
  const double total = plan.total_length();
  double target_arc = s * total + lookahead;
  if (plan.closed()) {
    target_arc = std::fmod(target_arc, total);
    if (target_arc < 0.0) target_arc += total;
  } else {
    target_arc = std::clamp(target_arc, 0.0, total);
  }

  CarrotTarget out;
  out.target_point = plan.point_at_arclength(target_arc);
  out.progress_s = target_arc / total;

  const Vec2 rel = (out.target_point - x.position()).rotated(-x.heading);
  out.delta_x.dx = rel.x;
  out.delta_x.dy = rel.y;
  out.delta_x.dheading = wrap_angle(plan.heading_at_arclength(target_arc) - x.heading);
  return out;
}

double gate_crossing_progress(const GlobalPlan& plan, const Vec2& a, const Vec2& b) {
  const auto& pts = plan.points();
  const auto& cum = plan.cumulative_arclength();
  const double total = plan.total_length();
  const Vec2 gate = b - a;

  std::vector<double> crossings;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 p = pts[i];
    const Vec2 d = pts[i + 1] - p;
    const double denom = d.cross(gate);
    if (denom == 0.0) {
      if (gate.cross(p - a) == 0.0 && segments_intersect(p, pts[i + 1], a, b)) {
        throw ValidationError("turn gate runs along the plan");
      }
      continue;
    }
    const Vec2 diff = a - p;
    const double u = diff.cross(gate) / denom;  // along plan segment
    const double w = diff.cross(d) / denom;     // along gate
    const bool last = (i + 2 == pts.size());
    const double u_hi = last ? 1.0 : 1.0 - 1e-12;  // half-open, avoids double count at nodes
    if (u >= 0.0 && u <= u_hi && w >= 0.0 && w <= 1.0) {
      crossings.push_back(cum[i] + u * (cum[i + 1] - cum[i]));
    }
  }
  std::sort(crossings.begin(), crossings.end());
  crossings.erase(std::unique(crossings.begin(), crossings.end(),
                              [](double x, double y) { return std::abs(x - y) < 1e-9; }),
                  crossings.end());
  if (crossings.size() != 1) {
    throw ValidationError("turn gate must intersect the plan exactly once (found " +
                          std::to_string(crossings.size()) + ")");
  }
  return crossings.front() / total;
}

std::vector<Track::GateProgress> Track::gate_progress() const {
  std::vector<GateProgress> out;
  out.reserve(turn_gates.size());
  for (const TurnGate& g : turn_gates) {
    GateProgress gp;
    gp.entry_s = gate_crossing_progress(plan, g.entry_a, g.entry_b);
    gp.exit_s = gate_crossing_progress(plan, g.exit_a, g.exit_b);
    out.push_back(gp);
  }
  return out;
}

std::uint64_t track_hash(const Track& track) {
  std::uint64_t h = kFnvOffset;
  auto mix_point = [&h](const Vec2& v) {
    h = hash_combine(h, v.x);
    h = hash_combine(h, v.y);
  };
  h = hash_combine(h, static_cast<std::uint8_t>(track.plan.closed()));
  for (const Vec2& p : track.plan.points()) mix_point(p);
  for (const auto& polyline : track.boundaries) {
    h = hash_combine(h, static_cast<std::uint64_t>(polyline.size()));
    for (const Vec2& p : polyline) mix_point(p);
  }
  for (const TurnGate& g : track.turn_gates) {
    h = fnv1a64(g.label, h);
    mix_point(g.entry_a);
    mix_point(g.entry_b);
    mix_point(g.exit_a);
    mix_point(g.exit_b);
  }
  return h;
}

}  // namespace ikd
