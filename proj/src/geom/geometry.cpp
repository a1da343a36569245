#include "mfplan/geom/geometry.hpp"

#include <algorithm>

namespace mfplan::geom {

double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

double area(const Polygon& poly) { return poly.size() < 3 ? 0.0 : std::abs(signed_area(poly)); }

Vec2 centroid(const Polygon& poly) {
  const double a = signed_area(poly);
  if (poly.size() < 3 || std::abs(a) < 1e-15) {
    Vec2 c;
    for (const auto& p : poly) c = c + p;
    return poly.empty() ? c : (1.0 / static_cast<double>(poly.size())) * c;
  }
  Vec2 c;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % n];
    c = c + cross(p, q) * (p + q);
  }
  return (1.0 / (6.0 * a)) * c;
}

bool is_convex(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cross(poly[(i + 1) % n] - poly[i], poly[(i + 2) % n] - poly[(i + 1) % n]);
    if (std::abs(c) < 1e-12) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign != 0 && s != sign) return false;
    sign = s;
  }
  return sign != 0;
}

Polygon ccw(Polygon poly) {
  if (signed_area(poly) < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

bool contains(const Polygon& convex, Vec2 p, double tol) {
  for (std::size_t i = 0, n = convex.size(); i < n; ++i) {
    const Vec2 a = convex[i], b = convex[(i + 1) % n];
    const Vec2 e = b - a;
    if (cross(e, p - a) < -tol * norm(e)) return false;
  }
  return !convex.empty();
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double s = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + s * ab));
}

bool disc_intersects(const Polygon& convex, Vec2 center, double radius) {
  if (contains(convex, center, 0.0)) return true;
  for (std::size_t i = 0, n = convex.size(); i < n; ++i) {
    if (segment_distance(center, convex[i], convex[(i + 1) % n]) < radius) return true;
  }
  return false;
}

Polygon clip(const Polygon& subject, const Polygon& clipper) {
  Polygon out = subject;
  for (std::size_t i = 0, n = clipper.size(); i < n && !out.empty(); ++i) {
    const Vec2 a = clipper[i], b = clipper[(i + 1) % n];
    const Vec2 e = b - a;
    auto side = [&](Vec2 p) { return cross(e, p - a); };
    Polygon in = std::move(out);
    out.clear();
    for (std::size_t j = 0, m = in.size(); j < m; ++j) {
      const Vec2 cur = in[j], nxt = in[(j + 1) % m];
      const double sc = side(cur), sn = side(nxt);
      if (sc >= 0) out.push_back(cur);
      if ((sc >= 0) != (sn >= 0)) {
        const double s = sc / (sc - sn);
        out.push_back(cur + s * (nxt - cur));
      }
    }
  }
  if (out.size() < 3 || area(out) < 1e-14) out.clear();
  return out;
}

Polygon convex_intersection(const std::vector<Polygon>& polys) {
  if (polys.empty()) return {};
  Polygon acc = polys.front();
  for (std::size_t i = 1; i < polys.size() && !acc.empty(); ++i) acc = clip(acc, polys[i]);
  return acc;
}

Polygon oriented_box(Vec2 center, double heading, double half_length, double half_width) {
  const Vec2 f{std::cos(heading), std::sin(heading)};
  const Vec2 l{-f.y, f.x};
  return {center - half_length * f - half_width * l, center + half_length * f - half_width * l,
          center + half_length * f + half_width * l, center - half_length * f + half_width * l};
}

std::vector<double> headings(const std::vector<Vec2>& points) {
  std::vector<double> h(points.size(), 0.0);
  double prev = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Vec2 d = points[i + 1] - points[i];
    if (norm(d) > 1e-9) prev = std::atan2(d.y, d.x);
    h[i] = prev;
  }
  if (!points.empty()) h.back() = prev;
  return h;
}

double arclength(const std::vector<Vec2>& points, Vec2 start) {
  double s = 0.0;
  Vec2 prev = start;
  for (const auto& p : points) {
    s += norm(p - prev);
    prev = p;
  }
  return s;
}

}  // namespace mfplan::geom
