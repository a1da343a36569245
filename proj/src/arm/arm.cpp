#include "mfplan/arm/arm.hpp"

namespace mfplan::arm {

using namespace diffkit;

ArmNet ArmNet::create(ParamStore& ps, const std::string& name, const ArmConfig& cfg, Rng& rng) {
  ArmNet net;
  net.cfg = cfg;
  net.encoder = synthworld::ContextEncoder::create(ps, name + ".encoder", cfg.width, cfg.max_obstacles, rng);
  net.embed = Linear::create(ps, name + ".embed", cfg.dim(), cfg.width, rng);
  net.query_name = name + ".query";
  Tensor q(Shape{1, 1, cfg.width});
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = rng.normal() * 0.1;
  ps.add(net.query_name, std::move(q));
  net.ln_keys = LayerNorm::create(ps, name + ".ln_keys", cfg.width);
  net.attn = MultiHeadAttention::create(ps, name + ".attn", cfg.width, 1, rng);
  net.ln_out = LayerNorm::create(ps, name + ".ln_out", cfg.width);
  net.projector = FeedForward::create(ps, name + ".projector", cfg.width, cfg.hidden, cfg.dim(), rng);
  return net;
}

Var ArmNet::operator()(Graph& g, const Var& proposals, const std::vector<const synthworld::SceneContext*>& scenes,
                       Var* weights) const {
  const Shape& sp = proposals.shape();
  if (sp.size() != 3 || sp[0] != scenes.size() || sp[2] != cfg.dim()) {
    throw ArmError("arm: proposals must be [B, K, " + std::to_string(cfg.dim()) + "], got " + to_string(sp));
  }
  if (sp[1] != cfg.proposals) {
    throw ArmError("arm: trained for K = " + std::to_string(cfg.proposals) + " proposals, got " +
                   std::to_string(sp[1]));
  }
  const std::size_t b = sp[0];
  Var tokens = concat({embed(g, proposals), encoder(g, scenes)}, 1);
  Var query = g.param(query_name);
  if (b > 1) query = add(query, g.constant(Tensor(Shape{b, 1, cfg.width})));
  Var h = add(query, attn(g, query, ln_keys(g, tokens), weights));
  return reshape(projector(g, ln_out(g, h)), {b, cfg.dim()});
}

namespace {

Tensor cumsum_matrix(std::size_t horizon) {
  const std::size_t d = 2 * horizon;
  Tensor m(Shape{d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; j += 2) m[i * d + j] = 1.0;
  }
  return m;
}

}  // namespace

Var to_waypoints(Graph& g, const Var& normalized, const gmnprior::NormalizationConstants& norm) {
  const std::size_t d = normalized.shape().back();
  Tensor scale(Shape{d}), shift(Shape{d});
  for (std::size_t i = 0; i < d; i += 2) {
    scale[i] = norm.scale.x;
    scale[i + 1] = norm.scale.y;
    shift[i] = norm.delta_mean.x;
    shift[i + 1] = norm.delta_mean.y;
  }
  Var deltas = add(mul(normalized, g.constant(std::move(scale))), g.constant(std::move(shift)));
  return matmul(deltas, g.constant(cumsum_matrix(d / 2)));
}

Trajectory to_trajectory(const Vector& normalized, const gmnprior::NormalizationConstants& norm) {
  return Trajectory{gmnprior::cumulative(gmnprior::denormalize(normalized, norm))};
}

Vector flatten(const Trajectory& t) {
  Vector v;
  v.reserve(2 * t.waypoints.size());
  for (const auto& p : t.waypoints) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return v;
}

Fused fuse(const ArmNet& net, const ParamStore& ps, const std::vector<Vector>& proposals,
           const synthworld::SceneContext& scene, const gmnprior::NormalizationConstants& norm) {
  if (proposals.size() != net.cfg.proposals) {
    throw ArmError("fuse: got " + std::to_string(proposals.size()) + " proposals, net expects " +
                   std::to_string(net.cfg.proposals));
  }
  const std::size_t d = net.cfg.dim();
  Tensor in(Shape{1, proposals.size(), d});
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    if (proposals[k].size() != d) throw ArmError("fuse: proposal has wrong dimension");
    std::copy(proposals[k].begin(), proposals[k].end(), in.data().begin() + k * d);
  }
  Graph g(&ps, false);
  Var w;
  Var out = net(g, g.constant(std::move(in)), {&scene}, &w);
  Fused f;
  f.trajectory = to_trajectory(out.value().values(), norm);
  f.weights = w.value().values();
  return f;
}

Var arm_loss(const Var& predicted_waypoints, const Var& expert_waypoints) {
  return mean_abs(sub(predicted_waypoints, expert_waypoints));
}

double total_loss(double l_tau, double l_flow, double l_map, double lambda_tau, double lambda_flow,
                  double lambda_map) {
  return lambda_tau * l_tau + lambda_flow * l_flow + lambda_map * l_map;
}

Trajectory average_proposals(const std::vector<Trajectory>& proposals) {
  if (proposals.empty()) throw ArmError("average_proposals: empty proposal set");
  Trajectory avg{proposals.front().waypoints};
  for (std::size_t k = 1; k < proposals.size(); ++k) {
    if (proposals[k].waypoints.size() != avg.waypoints.size()) throw ArmError("average_proposals: length mismatch");
    for (std::size_t i = 0; i < avg.waypoints.size(); ++i) avg.waypoints[i] = avg.waypoints[i] + proposals[k].waypoints[i];
  }
  const double inv = 1.0 / static_cast<double>(proposals.size());
  for (auto& p : avg.waypoints) p = inv * p;
  return avg;
}

}  // namespace mfplan::arm
