#pragma once

#include <cmath>
#include <vector>

namespace ikd {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm_sq() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm_sq()); }
  // Rotation by angle (counter-clockwise).
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double y = std::fmod(a + kPi, 2.0 * kPi);
  if (y <= 0.0) y += 2.0 * kPi;
  return y - kPi;
}

// Closest point on segment [a, b] to p, returned as parameter t in [0, 1].
double closest_point_param(const Vec2& p, const Vec2& a, const Vec2& b);

double dist_point_segment_sq(const Vec2& p, const Vec2& a, const Vec2& b);

inline double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::sqrt(dist_point_segment_sq(p, a, b));
}

// True if p lies on segment [a, b] (exact collinearity with bounding check).
bool point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

// Proper or touching intersection of segments [a,b] and [c,d].
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

// Even-odd containment test; points on the boundary count as inside.
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

// A polygon is simple when non-adjacent edges never touch and adjacent
// edges meet only at their shared vertex.
bool polygon_is_simple(const std::vector<Vec2>& poly);

// Distance along a ray (origin, unit dir) to segment [a, b]; returns
// +infinity when the ray misses.
double ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b);

}  // namespace ikd
