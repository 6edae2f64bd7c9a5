// Planar shapes in the element frame: signed distance, containment, extents.
#pragma once

#include <Eigen/Core>
#include <variant>
#include <vector>

namespace modnav::geom {

using Vec2 = Eigen::Vector2d;

// Axis-aligned rectangle centered at the element origin.
struct Rectangle {
  double width = 0.0;
  double height = 0.0;
};

// Simple polygon, vertices in order (either winding), element frame.
struct Polygon {
  std::vector<Vec2> vertices;
};

using Shape = std::variant<Rectangle, Polygon>;

// Throws std::invalid_argument for non-positive rectangle extents, polygons
// with fewer than three vertices, repeated vertices, or self-intersections.
void validate_shape(const Shape& shape);

// Negative inside, zero on the boundary, positive outside.
double signed_distance(const Vec2& p, const Shape& shape);

// Boundary counts as contained; defined as signed_distance(p) <= 0 so the
// two can never disagree.
bool contains(const Vec2& p, const Shape& shape);

// Radius of the smallest origin-centered disc covering the shape.
double circumradius(const Shape& shape);

bool shapes_equal(const Shape& a, const Shape& b, double tol = 1e-12);

// True when the interiors of the two shapes, placed at the given centers,
// intersect. Touching boundaries do not count.
bool shapes_overlap(const Shape& a, const Vec2& center_a, const Shape& b, const Vec2& center_b);

}  // namespace modnav::geom
