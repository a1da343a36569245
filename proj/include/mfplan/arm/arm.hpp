#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfplan/diffkit/layers.hpp"
#include "mfplan/gmnprior/gmn.hpp"
#include "mfplan/synthworld/context.hpp"

namespace mfplan::arm {

using gmnprior::Vector;
using synthworld::Trajectory;

class ArmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArmConfig {
  std::size_t width = 128;
  std::size_t hidden = 128;
  std::size_t horizon = 8;
  std::size_t max_obstacles = 4;
  std::size_t proposals = 8;

  std::size_t dim() const { return 2 * horizon; }
};

/// A single learned query attends (one head) over the embedded proposals and
/// the scene context tokens; the projector maps the result to normalized
/// deltas. Proposals carry no positional information.
struct ArmNet {
  ArmConfig cfg;
  synthworld::ContextEncoder encoder;
  diffkit::Linear embed;
  std::string query_name;
  diffkit::LayerNorm ln_keys;
  diffkit::MultiHeadAttention attn;
  diffkit::LayerNorm ln_out;
  diffkit::FeedForward projector;

  static ArmNet create(diffkit::ParamStore& ps, const std::string& name, const ArmConfig& cfg, Rng& rng);

  /// proposals [B, K, dim] (normalized) -> normalized deltas [B, dim].
  /// `weights`, when given, receives the attention [B, 1, K + context].
  diffkit::Var operator()(diffkit::Graph& g, const diffkit::Var& proposals,
                          const std::vector<const synthworld::SceneContext*>& scenes,
                          diffkit::Var* weights = nullptr) const;
};

/// Normalized deltas [B, dim] -> flattened waypoints [B, dim] in meters.
diffkit::Var to_waypoints(diffkit::Graph& g, const diffkit::Var& normalized,
                          const gmnprior::NormalizationConstants& norm);

Trajectory to_trajectory(const Vector& normalized, const gmnprior::NormalizationConstants& norm);
Vector flatten(const Trajectory& t);

struct Fused {
  Trajectory trajectory;
  /// K proposal entries followed by the context-token entries.
  std::vector<double> weights;
};

Fused fuse(const ArmNet& net, const diffkit::ParamStore& ps, const std::vector<Vector>& proposals,
           const synthworld::SceneContext& scene, const gmnprior::NormalizationConstants& norm);

/// Mean absolute waypoint error in meters over waypoints and both axes.
diffkit::Var arm_loss(const diffkit::Var& predicted_waypoints, const diffkit::Var& expert_waypoints);

/// Weighted sum of the loss terms. L_map is accepted for completeness; nothing
/// in this project produces a non-zero value for it.
double total_loss(double l_tau, double l_flow, double l_map, double lambda_tau, double lambda_flow,
                  double lambda_map);

Trajectory average_proposals(const std::vector<Trajectory>& proposals);

}  // namespace mfplan::arm
