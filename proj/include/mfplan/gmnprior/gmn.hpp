#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfplan/core/rng.hpp"
#include "mfplan/geom/geometry.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::gmnprior {

using geom::Vec2;
using Vector = std::vector<double>;

class GmnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kScaleFloor = 1e-8;
inline constexpr double kSigmaFloor = 1e-3;

/// Per-step displacements, starting from the ego at the origin.
std::vector<Vec2> trajectory_deltas(const std::vector<Vec2>& waypoints);
std::vector<Vec2> cumulative(const std::vector<Vec2>& deltas);

struct NormalizationConstants {
  Vec2 delta_mean;
  Vec2 scale{1.0, 1.0};
};

/// Per-axis statistics over every (trajectory, timestep) delta.
NormalizationConstants fit_normalization(const std::vector<std::vector<Vec2>>& deltas);
/// Flattened [x0, y0, x1, y1, ...] normalized deltas.
Vector normalize(const std::vector<Vec2>& deltas, const NormalizationConstants& c);
std::vector<Vec2> denormalize(const Vector& normalized, const NormalizationConstants& c);

struct KMeansResult {
  std::vector<Vector> means;
  std::vector<std::size_t> assignments;
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective;
  std::size_t iterations = 0;
};

KMeansResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100,
                    double tol = 1e-10);

struct GaussianMixtureNoise {
  std::vector<Vector> means;
  std::vector<double> sigmas;
  std::vector<double> weights;
  NormalizationConstants norm;

  std::size_t k() const { return means.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
};

/// Components from k-means on normalized points; sigma is the RMS deviation
/// of members around their centroid over all coordinates.
GaussianMixtureNoise build_gmn(const std::vector<Vector>& normalized, std::size_t k, std::uint64_t seed,
                               const NormalizationConstants& norm);
/// Normalization and mixture fitted on every expert of `scenarios`.
GaussianMixtureNoise gmn_from_dataset(const std::vector<synthworld::Scenario>& scenarios, std::size_t k,
                                      std::uint64_t seed);

/// `copies` identical N(0, I) components in normalized space: the
/// standard-Gaussian prior ablation.
GaussianMixtureNoise standard_gaussian(std::size_t dim, const NormalizationConstants& norm, std::size_t copies);

Vector sample_component(const GaussianMixtureNoise& gmn, std::size_t k, Rng& rng);
Vector sample_component(const GaussianMixtureNoise& gmn, std::size_t k, std::uint64_t seed);
/// One draw per component, in component order.
std::vector<Vector> sample_all(const GaussianMixtureNoise& gmn, std::uint64_t seed);

/// argmin_k |x - mu_k|, lowest index on ties.
std::size_t nearest_component(const GaussianMixtureNoise& gmn, const Vector& normalized);

struct ManualTemplate {
  double speed = 8.0;     // m/s
  double yaw_rate = 0.0;  // rad/s; 0 is straight
};

/// Constant-speed straight/curved delta templates sharing one sigma.
GaussianMixtureNoise manual_gmn(const std::vector<ManualTemplate>& templates, double sigma,
                                const NormalizationConstants& norm, std::size_t horizon, double dt);

nlohmann::json to_json(const GaussianMixtureNoise& gmn);
GaussianMixtureNoise gmn_from_json(const nlohmann::json& j);

}  // namespace mfplan::gmnprior
