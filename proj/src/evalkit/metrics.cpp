#include "mfplan/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfplan::evalkit {

Polygon oriented_box(const Trajectory& traj, std::size_t i, const EgoBox& box) {
  if (i >= traj.waypoints.size()) throw MetricError("oriented_box: timestep out of range");
  const auto h = geom::headings(traj.waypoints);
  return geom::oriented_box(traj.waypoints[i], h[i], box.half_length, box.half_width);
}

double grid_iou(const std::vector<Polygon>& polys, std::size_t resolution) {
  if (polys.empty()) throw MetricError("grid_iou: no polygons");
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& p : polys) {
    for (const auto& v : p) {
      x0 = std::min(x0, v.x);
      x1 = std::max(x1, v.x);
      y0 = std::min(y0, v.y);
      y1 = std::max(y1, v.y);
    }
  }
  const double dx = (x1 - x0) / static_cast<double>(resolution);
  const double dy = (y1 - y0) / static_cast<double>(resolution);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double y = y0 + (static_cast<double>(i) + 0.5) * dy;
    for (std::size_t j = 0; j < resolution; ++j) {
      const geom::Vec2 p{x0 + (static_cast<double>(j) + 0.5) * dx, y};
      std::size_t hits = 0;
      for (const auto& poly : polys) hits += geom::contains(poly, p, 0.0) ? 1 : 0;
      if (hits > 0) ++uni;
      if (hits == polys.size()) ++inter;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double multimodality_d(const std::vector<Trajectory>& proposals, const EgoBox& box, std::size_t resolution) {
  if (proposals.size() < 2) throw MetricError("multimodality D needs at least two proposals");
  const std::size_t steps = proposals.front().waypoints.size();
  std::vector<std::vector<double>> heads;
  for (const auto& p : proposals) {
    if (p.waypoints.size() != steps) throw MetricError("multimodality D: proposals differ in length");
    heads.push_back(geom::headings(p.waypoints));
  }
  double iou = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Polygon> boxes;
    for (std::size_t k = 0; k < proposals.size(); ++k) {
      boxes.push_back(geom::oriented_box(proposals[k].waypoints[t], heads[k][t], box.half_length, box.half_width));
    }
    iou += grid_iou(boxes, resolution);
  }
  return 1.0 - iou / static_cast<double>(steps);
}

double m_dp(double d, double score) { return d * score; }

double mean_l2(const Trajectory& a, const Trajectory& b) {
  if (a.waypoints.size() != b.waypoints.size() || a.waypoints.empty()) {
    throw MetricError("mean_l2: trajectories differ in length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) s += geom::norm(a.waypoints[i] - b.waypoints[i]);
  return s / static_cast<double>(a.waypoints.size());
}

ScoreBreakdown drive_score(const Trajectory& traj, const Scenario& scenario, const EgoBox& box) {
  ScoreBreakdown r;
  const auto h = geom::headings(traj.waypoints);
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
    const auto b = geom::oriented_box(traj.waypoints[i], h[i], box.half_length, box.half_width);
    for (const auto& o : scenario.scene.obstacles) {
      if (geom::disc_intersects(b, o.center, o.radius)) r.nc = 0;
    }
    for (const auto& v : b) {
      if (!geom::contains(scenario.scene.corridor, v)) r.dac = 0;
    }
  }
  const Trajectory* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : scenario.experts) {
    if (e.waypoints.size() != traj.waypoints.size()) continue;
    const double d = mean_l2(traj, e);
    if (d < best) {
      best = d;
      nearest = &e;
    }
  }
  if (!nearest) nearest = &scenario.experts.front();
  const double ref = geom::arclength(nearest->waypoints);
  r.ep = ref > 0.0 ? std::clamp(geom::arclength(traj.waypoints) / ref, 0.0, 1.0) : 1.0;
  r.score = 100.0 * r.nc * r.dac * r.ep;
  return r;
}

double mode_recall(const std::vector<Trajectory>& proposals, const std::vector<Trajectory>& experts, double radius) {
  if (!(radius > 0.0)) throw MetricError("mode_recall: radius must be positive");
  if (experts.empty()) throw MetricError("mode_recall: no experts");
  std::size_t hit = 0;
  for (const auto& e : experts) {
    for (const auto& p : proposals) {
      if (mean_l2(p, e) <= radius) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(experts.size());
}

namespace {

double mean_pairwise(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double s = 0.0;
  for (const auto& x : a) {
    for (const auto& y : b) {
      double d = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
      s += std::sqrt(d);
    }
  }
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace

double energy_distance(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.empty() || b.empty()) throw MetricError("energy_distance: empty sample set");
  const std::size_t dim = a.front().size();
  for (const auto* set : {&a, &b}) {
    for (const auto& v : *set) {
      if (v.size() != dim) throw MetricError("energy_distance: mixed dimensions");
    }
  }
  const double ed = 2.0 * mean_pairwise(a, b) - mean_pairwise(a, a) - mean_pairwise(b, b);
  return std::max(ed, 0.0);
}

}  // namespace mfplan::evalkit
