#include "mfplan/gmnprior/gmn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>


namespace mfplan::gmnprior {

std::vector<Vec2> trajectory_deltas(const std::vector<Vec2>& waypoints) {
  std::vector<Vec2> d;
  d.reserve(waypoints.size());
  Vec2 prev{};
  for (const auto& p : waypoints) {
    d.push_back(p - prev);
    prev = p;
  }
  return d;
}

std::vector<Vec2> cumulative(const std::vector<Vec2>& deltas) {
  std::vector<Vec2> w;
  w.reserve(deltas.size());
  Vec2 acc{};
  for (const auto& d : deltas) {
    acc = acc + d;
    w.push_back(acc);
  }
  return w;
}

NormalizationConstants fit_normalization(const std::vector<std::vector<Vec2>>& deltas) {
  std::size_t n = 0;
  Vec2 sum{}, lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi{-lo.x, -lo.y};
  for (const auto& traj : deltas) {
    for (const auto& d : traj) {
      sum = sum + d;
      lo = {std::min(lo.x, d.x), std::min(lo.y, d.y)};
      hi = {std::max(hi.x, d.x), std::max(hi.y, d.y)};
      ++n;
    }
  }
  if (n == 0) throw GmnError("fit_normalization: empty dataset");
  NormalizationConstants c;
  c.delta_mean = (1.0 / static_cast<double>(n)) * sum;
  c.scale.x = std::max({hi.x - c.delta_mean.x, c.delta_mean.x - lo.x, kScaleFloor});
  c.scale.y = std::max({hi.y - c.delta_mean.y, c.delta_mean.y - lo.y, kScaleFloor});
  return c;
}

Vector normalize(const std::vector<Vec2>& deltas, const NormalizationConstants& c) {
  Vector out;
  out.reserve(2 * deltas.size());
  for (const auto& d : deltas) {
    out.push_back((d.x - c.delta_mean.x) / c.scale.x);
    out.push_back((d.y - c.delta_mean.y) / c.scale.y);
  }
  return out;
}

std::vector<Vec2> denormalize(const Vector& normalized, const NormalizationConstants& c) {
  std::vector<Vec2> out;
  out.reserve(normalized.size() / 2);
  for (std::size_t i = 0; i + 1 < normalized.size(); i += 2) {
    out.push_back({normalized[i] * c.scale.x + c.delta_mean.x, normalized[i + 1] * c.scale.y + c.delta_mean.y});
  }
  return out;
}

namespace {

double sq_dist(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t nearest(const std::vector<Vector>& means, const Vector& x, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double d = sq_dist(means[k], x);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                    double tol) {
  if (k == 0) throw GmnError("kmeans: K must be positive");
  if (points.size() < k) {
    throw GmnError("kmeans: " + std::to_string(points.size()) + " points for K = " + std::to_string(k));
  }
  const std::size_t n = points.size();
  Rng rng(seed);
  KMeansResult res;

  // k-means++ seeding.
  res.means.push_back(points[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], res.means[0]);
  while (res.means.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = rng.index(n);
    }
    res.means.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points[i], res.means.back()));
  }

  res.assignments.assign(n, 0);
  const std::size_t dim = points.front().size();
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iters, 1); ++it) {
    double obj = 0.0;
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      res.assignments[i] = nearest(res.means, points[i], &dist[i]);
      obj += dist[i];
    }
    res.objective.push_back(obj);
    res.iterations = it + 1;

    std::vector<Vector> next(k, Vector(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& m = next[res.assignments[i]];
      for (std::size_t j = 0; j < dim; ++j) m[j] += points[i][j];
      ++count[res.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        for (auto& v : next[c]) v /= static_cast<double>(count[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      dist[far] = 0.0;
      next[c] = points[far];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(sq_dist(next[c], res.means[c])));
    res.means = std::move(next);
    if (shift < tol) break;
  }
  for (std::size_t i = 0; i < n; ++i) res.assignments[i] = nearest(res.means, points[i]);
  return res;
}

GaussianMixtureNoise build_gmn(const std::vector<Vector>& normalized, std::size_t k, std::uint64_t seed,
                               const NormalizationConstants& norm) {
  if (normalized.empty()) throw GmnError("build_gmn: empty dataset");
  const auto km = kmeans(normalized, k, seed);
  GaussianMixtureNoise g;
  g.means = km.means;
  g.norm = norm;
  g.weights.assign(k, 1.0);
  std::vector<double> ss(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto c = km.assignments[i];
    ss[c] += sq_dist(normalized[i], g.means[c]);
    ++count[c];
  }
  const double dim = static_cast<double>(normalized.front().size());
  for (std::size_t c = 0; c < k; ++c) {
    const double rms = count[c] > 0 ? std::sqrt(ss[c] / (static_cast<double>(count[c]) * dim)) : 0.0;
    g.sigmas.push_back(std::max(rms, kSigmaFloor));
  }
  return g;
}

GaussianMixtureNoise gmn_from_dataset(const std::vector<synthworld::Scenario>& scenarios, std::size_t k,
                                      std::uint64_t seed) {
  std::vector<std::vector<Vec2>> deltas;
  for (const auto& s : scenarios) {
    for (const auto& e : s.experts) deltas.push_back(trajectory_deltas(e.waypoints));
  }
  if (deltas.empty()) throw GmnError("build_gmn: dataset has no expert trajectories");
  if (deltas.size() < k) {
    throw GmnError("build_gmn: K = " + std::to_string(k) + " exceeds the " + std::to_string(deltas.size()) +
                   " expert trajectories");
  }
  const auto norm = fit_normalization(deltas);
  std::vector<Vector> points;
  points.reserve(deltas.size());
  for (const auto& d : deltas) points.push_back(normalize(d, norm));
  return build_gmn(points, k, seed, norm);
}

GaussianMixtureNoise standard_gaussian(std::size_t dim, const NormalizationConstants& norm, std::size_t copies) {
  GaussianMixtureNoise g;
  g.norm = norm;
  g.means.assign(copies, Vector(dim, 0.0));
  g.sigmas.assign(copies, 1.0);
  g.weights.assign(copies, 1.0);
  return g;
}

Vector sample_component(const GaussianMixtureNoise& gmn, std::size_t k, Rng& rng) {
  if (k >= gmn.k()) {
    throw GmnError("component " + std::to_string(k) + " out of range for K = " + std::to_string(gmn.k()));
  }
  Vector x = gmn.means[k];
  for (auto& v : x) v += gmn.sigmas[k] * rng.normal();
  return x;
}

Vector sample_component(const GaussianMixtureNoise& gmn, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return sample_component(gmn, k, rng);
}

std::vector<Vector> sample_all(const GaussianMixtureNoise& gmn, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out;
  for (std::size_t k = 0; k < gmn.k(); ++k) out.push_back(sample_component(gmn, k, rng));
  return out;
}

std::size_t nearest_component(const GaussianMixtureNoise& gmn, const Vector& normalized) {
  if (gmn.k() == 0) throw GmnError("nearest_component: empty mixture");
  return nearest(gmn.means, normalized);
}

GaussianMixtureNoise manual_gmn(const std::vector<ManualTemplate>& templates, double sigma,
                                const NormalizationConstants& norm, std::size_t horizon, double dt) {
  if (templates.empty()) throw GmnError("manual_gmn: no templates");
  if (!(sigma > 0.0)) throw GmnError("manual_gmn: sigma must be positive");
  GaussianMixtureNoise g;
  g.norm = norm;
  for (const auto& t : templates) {
    std::vector<Vec2> deltas;
    for (std::size_t i = 0; i < horizon; ++i) {
      const double heading = t.yaw_rate * (static_cast<double>(i) + 0.5) * dt;
      deltas.push_back({t.speed * dt * std::cos(heading), t.speed * dt * std::sin(heading)});
    }
    g.means.push_back(normalize(deltas, norm));
    g.sigmas.push_back(sigma);
    g.weights.push_back(1.0);
  }
  return g;
}

nlohmann::json to_json(const GaussianMixtureNoise& gmn) {
  return {{"K", gmn.k()},
          {"means", gmn.means},
          {"sigmas", gmn.sigmas},
          {"weights", gmn.weights},
          {"normalization",
           {{"delta_mean", {gmn.norm.delta_mean.x, gmn.norm.delta_mean.y}},
            {"scale", {gmn.norm.scale.x, gmn.norm.scale.y}}}}};
}

GaussianMixtureNoise gmn_from_json(const nlohmann::json& j) {
  GaussianMixtureNoise g;
  try {
    g.means = j.at("means").get<std::vector<Vector>>();
    g.sigmas = j.at("sigmas").get<std::vector<double>>();
    g.weights = j.at("weights").get<std::vector<double>>();
    const auto& n = j.at("normalization");
    const auto m = n.at("delta_mean").get<std::vector<double>>();
    const auto s = n.at("scale").get<std::vector<double>>();
    if (m.size() != 2 || s.size() != 2) throw GmnError("normalization constants must have two axes");
    g.norm = {{m[0], m[1]}, {s[0], s[1]}};
  } catch (const nlohmann::json::exception& e) {
    throw GmnError(std::string("malformed mixture record: ") + e.what());
  }
  if (g.means.empty() || g.sigmas.size() != g.means.size() || g.weights.size() != g.means.size() ||
      j.value("K", std::size_t{0}) != g.means.size()) {
    throw GmnError("mixture record has inconsistent component counts");
  }
  return g;
}

}  // namespace mfplan::gmnprior
