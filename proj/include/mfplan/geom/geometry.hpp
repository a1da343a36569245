#pragma once

#include <cmath>
#include <vector>

namespace mfplan::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

using Polygon = std::vector<Vec2>;

/// Positive for counter-clockwise vertex order.
double signed_area(const Polygon& poly);
double area(const Polygon& poly);
Vec2 centroid(const Polygon& poly);
bool is_convex(const Polygon& poly);
/// Reverses clockwise input so the result is counter-clockwise.
Polygon ccw(Polygon poly);

/// True if `p` lies inside or on the boundary (within `tol`) of a convex CCW polygon.
bool contains(const Polygon& convex, Vec2 p, double tol = 1e-9);

double segment_distance(Vec2 p, Vec2 a, Vec2 b);
bool disc_intersects(const Polygon& convex, Vec2 center, double radius);

/// Sutherland-Hodgman clip of `subject` against the convex CCW `clip` polygon.
Polygon clip(const Polygon& subject, const Polygon& clip);
/// Intersection of convex CCW polygons; empty when they share no area.
Polygon convex_intersection(const std::vector<Polygon>& polys);

/// Rectangle centered at `center`, rotated by `heading`, as 4 CCW vertices.
Polygon oriented_box(Vec2 center, double heading, double half_length, double half_width);

/// Heading at each waypoint from the forward difference to the next point.
/// The last point repeats the previous heading; zero-length steps carry the
/// previous heading forward (0, i.e. +x, before any motion).
std::vector<double> headings(const std::vector<Vec2>& points);
double arclength(const std::vector<Vec2>& points, Vec2 start = {});

}  // namespace mfplan::geom
