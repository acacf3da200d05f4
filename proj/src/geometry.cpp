#include "ikd/geometry.hpp"

#include <algorithm>
#include <limits>

namespace ikd {

double closest_point_param(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len_sq = ab.norm_sq();
  if (len_sq <= 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
}

double dist_point_segment_sq(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double t = closest_point_param(p, a, b);
  return (p - (a + (b - a) * t)).norm_sq();
}

bool point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const Vec2 ap = p - a;
  if (ab.cross(ap) != 0.0) return false;
  const double d = ab.dot(ap);
  return d >= 0.0 && d <= ab.norm_sq();
}

namespace {

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = (b - a).cross(c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

}  // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && point_on_segment(c, a, b)) return true;
  if (o2 == 0 && point_on_segment(d, a, b)) return true;
  if (o3 == 0 && point_on_segment(a, c, d)) return true;
  if (o4 == 0 && point_on_segment(b, c, d)) return true;
  return false;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if (point_on_segment(p, poly[i], poly[(i + 1) % n])) return true;
  }
  // Even-odd ray crossing, ray towards +x.
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool polygon_is_simple(const std::vector<Vec2>& poly) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if ((b - a).norm_sq() == 0.0) return false;
    for (size_t j = i + 1; j < n; ++j) {
      const Vec2& c = poly[j];
      const Vec2& d = poly[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Shared endpoint is fine; any further contact is not.
        const Vec2& shared = (j == i + 1) ? b : a;
        const Vec2& c_far = (j == i + 1) ? d : c;
        const Vec2& a_far = (j == i + 1) ? a : b;
        if (point_on_segment(c_far, a, b) && !(c_far.x == shared.x && c_far.y == shared.y))
          return false;
        if (point_on_segment(a_far, c, d) && !(a_far.x == shared.x && a_far.y == shared.y))
          return false;
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

double ray_segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b) {
  const double inf = std::numeric_limits<double>::infinity();
  const Vec2 seg = b - a;
  const double denom = dir.cross(seg);
  if (denom == 0.0) {
    // Parallel: hit only if collinear; report nearest forward endpoint.
    if (dir.cross(a - origin) != 0.0) return inf;
    const double ta = (a - origin).dot(dir);
    const double tb = (b - origin).dot(dir);
    double t = inf;
    if (ta >= 0.0) t = std::min(t, ta);
    if (tb >= 0.0) t = std::min(t, tb);
    return t;
  }
  const Vec2 diff = a - origin;
  const double t = diff.cross(seg) / denom;
  const double u = diff.cross(dir) / denom;
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return inf;
}

}  // namespace ikd
