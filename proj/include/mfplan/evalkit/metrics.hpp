#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mfplan/gmnprior/gmn.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::evalkit {

using geom::Polygon;
using gmnprior::Vector;
using synthworld::Scenario;
using synthworld::Trajectory;

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EgoBox {
  double half_length = 2.0;
  double half_width = 0.9;
};

/// Ego footprint at waypoint `i`, oriented along the derived heading.
Polygon oriented_box(const Trajectory& traj, std::size_t i, const EgoBox& box = {});

/// Intersection-over-union of a set of boxes estimated on a res x res grid
/// spanning their common bounding rectangle.
double grid_iou(const std::vector<Polygon>& polys, std::size_t resolution = 400);

/// 1 - mean over timesteps of the grid IoU of all proposal boxes.
double multimodality_d(const std::vector<Trajectory>& proposals, const EgoBox& box = {},
                       std::size_t resolution = 400);

/// Diversity times driving score (score on the 0-100 scale).
double m_dp(double d, double score);

struct ScoreBreakdown {
  int nc = 1;
  int dac = 1;
  double ep = 1.0;
  double score = 100.0;
};

/// No-collision, drivable-area compliance and progress against the nearest
/// expert mode; score = nc * dac * ep * 100.
ScoreBreakdown drive_score(const Trajectory& traj, const Scenario& scenario, const EgoBox& box = {});

/// Mean per-waypoint Euclidean distance.
double mean_l2(const Trajectory& a, const Trajectory& b);

/// Fraction of experts matched by some proposal within `radius` (mean L2).
double mode_recall(const std::vector<Trajectory>& proposals, const std::vector<Trajectory>& experts,
                   double radius = 0.5);

/// 2 E|a - b| - E|a - a'| - E|b - b'| over all pairs (V-statistic).
double energy_distance(const std::vector<Vector>& a, const std::vector<Vector>& b);

}  // namespace mfplan::evalkit
