#include "mfplan/core/error.hpp"
#include "mfplan/meanflow/planner.hpp"

namespace mfplan::meanflow {

using namespace diffkit;

const char* to_string(ModelKind k) { return k == ModelKind::meanflow ? "meanflow" : "flow_matching"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "meanflow") return ModelKind::meanflow;
  if (s == "flow_matching") return ModelKind::flow_matching;
  throw ArgumentError("unknown model kind '" + s + "'");
}

PlannerModel PlannerModel::create(ModelKind kind, const ModelConfig& cfg, gmnprior::GaussianMixtureNoise gmn,
                                  std::uint64_t seed) {
  if (gmn.k() == 0 || gmn.dim() != cfg.dim()) {
    throw ArgumentError("prior dimension " + std::to_string(gmn.dim()) + " does not match model dimension " +
                                std::to_string(cfg.dim()));
  }
  PlannerModel m;
  m.kind = kind;
  m.cfg = cfg;
  m.cfg.components = gmn.k();
  m.gmn = std::move(gmn);
  Rng rng(seed);
  m.encoder = synthworld::ContextEncoder::create(m.params, "enc", cfg.width, cfg.max_obstacles, rng);
  m.decoder = DecoderNet::create(m.params, "dec", m.cfg, kind == ModelKind::meanflow, rng);
  if (kind == ModelKind::meanflow) {
    arm::ArmConfig ac;
    ac.width = cfg.width;
    ac.hidden = cfg.width;
    ac.horizon = cfg.horizon;
    ac.max_obstacles = cfg.max_obstacles;
    ac.proposals = m.cfg.components;
    m.arm = arm::ArmNet::create(m.params, "arm", ac, rng);
  }
  return m;
}

Tensor PlannerModel::evaluate(const std::vector<const SceneContext*>& scenes, const Tensor& z, double r,
                              double t) const {
  Graph g(&params, false);
  const std::size_t b = scenes.size();
  Var ctx = encoder(g, scenes);
  Var rv = g.constant(Tensor(Shape{b, 1}, r));
  Var tv = g.constant(Tensor(Shape{b, 1}, t));
  return decoder(g, g.constant(z), rv, tv, ctx).value();
}

std::vector<std::pair<std::size_t, Vector>> draw_noise(const gmnprior::GaussianMixtureNoise& gmn, std::uint64_t seed,
                                                       std::optional<std::size_t> only, std::size_t count) {
  Rng rng(seed);
  std::vector<std::pair<std::size_t, Vector>> out;
  if (only) {
    const std::size_t n = count > 0 ? count : gmn.k();
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(*only, gmnprior::sample_component(gmn, *only, rng));
  } else {
    for (std::size_t k = 0; k < gmn.k(); ++k) out.emplace_back(k, gmnprior::sample_component(gmn, k, rng));
  }
  return out;
}

Tensor one_step(const PlannerModel& model, const std::vector<const SceneContext*>& scenes, const Tensor& noise) {
  const Tensor u = model.evaluate(scenes, noise, 0.0, 1.0);
  return noise - u;
}

std::vector<Proposal> one_step_sample(const PlannerModel& model, const SceneContext& scene, std::uint64_t seed,
                                      std::optional<std::size_t> only) {
  const auto draws = draw_noise(model.gmn, seed, only);
  const std::size_t d = model.cfg.dim();
  Tensor z(Shape{1, draws.size(), d});
  for (std::size_t i = 0; i < draws.size(); ++i) {
    std::copy(draws[i].second.begin(), draws[i].second.end(), z.data().begin() + i * d);
  }
  const Tensor x1 = one_step(model, {&scene}, z);
  std::vector<Proposal> out;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    Proposal p;
    p.component = draws[i].first;
    p.noise = draws[i].second;
    p.normalized.assign(x1.data().begin() + i * d, x1.data().begin() + (i + 1) * d);
    p.trajectory = arm::to_trajectory(p.normalized, model.gmn.norm);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mfplan::meanflow
