#include "modnav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace modnav::geom {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

// Any contact between closed segments counts as an intersection.
bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

double polygon_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (size_t i = 0; i < v.size(); ++i) a += cross2(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

void validate_polygon(const Polygon& poly) {
  const auto& v = poly.vertices;
  const size_t n = v.size();
  if (n < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  for (const auto& p : v) {
    if (!p.allFinite()) throw std::invalid_argument("polygon vertex is not finite");
  }
  for (size_t i = 0; i < n; ++i) {
    if ((v[i] - v[(i + 1) % n]).norm() < 1e-12) {
      throw std::invalid_argument("polygon has a zero-length edge");
    }
  }
  if (std::abs(polygon_area(v)) < 1e-12) throw std::invalid_argument("polygon has zero area");
  // Non-adjacent edge pairs must not touch; adjacent ones share exactly the
  // common vertex by the zero-length check above.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
        throw std::invalid_argument("polygon is self-intersecting");
      }
    }
  }
}

double rectangle_signed_distance(const Vec2& p, const Rectangle& r) {
  const Vec2 q(std::abs(p.x()) - 0.5 * r.width, std::abs(p.y()) - 0.5 * r.height);
  const Vec2 outside(std::max(q.x(), 0.0), std::max(q.y(), 0.0));
  return outside.norm() + std::min(std::max(q.x(), q.y()), 0.0);
}

double polygon_signed_distance(const Vec2& p, const Polygon& poly) {
  const auto& v = poly.vertices;
  const size_t n = v.size();
  double dist = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    dist = std::min(dist, point_segment_distance(p, a, b));
    // Even-odd ray cast along +x.
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xint = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < xint) inside = !inside;
    }
  }
  return inside ? -dist : dist;
}

}  // namespace

void validate_shape(const Shape& shape) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          if (!(s.width > 0.0) || !(s.height > 0.0) || !std::isfinite(s.width) ||
              !std::isfinite(s.height)) {
            throw std::invalid_argument("rectangle extents must be positive and finite");
          }
        } else {
          validate_polygon(s);
        }
      },
      shape);
}

double signed_distance(const Vec2& p, const Shape& shape) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          return rectangle_signed_distance(p, s);
        } else {
          return polygon_signed_distance(p, s);
        }
      },
      shape);
}

bool contains(const Vec2& p, const Shape& shape) { return signed_distance(p, shape) <= 0.0; }

double circumradius(const Shape& shape) {
  return std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          return std::hypot(0.5 * s.width, 0.5 * s.height);
        } else {
          double r = 0.0;
          for (const auto& v : s.vertices) r = std::max(r, v.norm());
          return r;
        }
      },
      shape);
}

namespace {

std::vector<Vec2> shape_corners(const Shape& s, const Vec2& center) {
  std::vector<Vec2> out;
  if (std::holds_alternative<Rectangle>(s)) {
    const auto& r = std::get<Rectangle>(s);
    const double hw = 0.5 * r.width;
    const double hh = 0.5 * r.height;
    out = {center + Vec2(-hw, -hh), center + Vec2(hw, -hh), center + Vec2(hw, hh),
           center + Vec2(-hw, hh)};
  } else {
    for (const auto& v : std::get<Polygon>(s).vertices) out.push_back(center + v);
  }
  return out;
}

}  // namespace

bool shapes_overlap(const Shape& a, const Vec2& center_a, const Shape& b, const Vec2& center_b) {
  // Axis-aligned fast path.
  if (std::holds_alternative<Rectangle>(a) && std::holds_alternative<Rectangle>(b)) {
    const auto& ra = std::get<Rectangle>(a);
    const auto& rb = std::get<Rectangle>(b);
    return std::abs(center_a.x() - center_b.x()) < 0.5 * (ra.width + rb.width) &&
           std::abs(center_a.y() - center_b.y()) < 0.5 * (ra.height + rb.height);
  }
  // General case: interior containment either way, or crossing edges.
  const auto pa = shape_corners(a, center_a);
  const auto pb = shape_corners(b, center_b);
  if (signed_distance(pa[0] - center_b, b) < 0.0) return true;
  if (signed_distance(pb[0] - center_a, a) < 0.0) return true;
  for (size_t i = 0; i < pa.size(); ++i) {
    for (size_t j = 0; j < pb.size(); ++j) {
      const Vec2& a1 = pa[i];
      const Vec2& a2 = pa[(i + 1) % pa.size()];
      const Vec2& b1 = pb[j];
      const Vec2& b2 = pb[(j + 1) % pb.size()];
      if (orientation(a1, a2, b1) * orientation(a1, a2, b2) < 0 &&
          orientation(b1, b2, a1) * orientation(b1, b2, a2) < 0) {
        return true;
      }
    }
  }
  return false;
}

bool shapes_equal(const Shape& a, const Shape& b, double tol) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<Rectangle>(a)) {
    const auto& ra = std::get<Rectangle>(a);
    const auto& rb = std::get<Rectangle>(b);
    return std::abs(ra.width - rb.width) <= tol && std::abs(ra.height - rb.height) <= tol;
  }
  const auto& pa = std::get<Polygon>(a).vertices;
  const auto& pb = std::get<Polygon>(b).vertices;
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if ((pa[i] - pb[i]).norm() > tol) return false;
  }
  return true;
}

}  // namespace modnav::geom
