#pragma once

// Small models and datasets shared by the unit tests.

#include "mfplan/flowbase/flow_matching.hpp"
#include "mfplan/gmnprior/gmn.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace fixture {

inline mfplan::meanflow::ModelConfig tiny_model() {
  mfplan::meanflow::ModelConfig c;
  c.width = 16;
  c.depth = 1;
  c.heads = 2;
  c.ffn_hidden = 16;
  return c;
}

inline std::vector<mfplan::synthworld::Scenario> scenes(std::size_t n, std::size_t family, std::uint64_t seed) {
  mfplan::synthworld::WorldConfig w;
  w.n_scenarios = n;
  w.family_mix = {0, 0, 0, 0};
  w.family_mix[family] = 1.0;
  return mfplan::synthworld::generate_dataset(w, seed);
}

inline mfplan::meanflow::PlannerModel model(mfplan::meanflow::ModelKind kind,
                                            const std::vector<mfplan::synthworld::Scenario>& data, std::size_t k,
                                            std::uint64_t seed, mfplan::meanflow::ModelConfig cfg = tiny_model()) {
  cfg.components = k;
  return mfplan::meanflow::PlannerModel::create(kind, cfg, mfplan::gmnprior::gmn_from_dataset(data, k, seed), seed);
}

/// Randomizes every parameter so that zero-initialized heads do not hide
/// gradient paths.
inline void perturb(mfplan::diffkit::ParamStore& ps, std::uint64_t seed, double scale = 0.3) {
  mfplan::Rng rng(seed);
  for (auto& slot : ps.slots()) {
    for (double& w : slot.value.data()) w += scale * rng.normal();
  }
}

inline mfplan::meanflow::FlowBatch batch(const mfplan::meanflow::PlannerModel& m,
                                         const std::vector<mfplan::synthworld::Scenario>& data, std::uint64_t seed) {
  using mfplan::diffkit::Shape;
  using mfplan::diffkit::Tensor;
  mfplan::Rng rng(seed);
  const std::size_t b = data.size(), d = m.cfg.dim();
  mfplan::meanflow::FlowBatch out{{}, Tensor(Shape{b, 1, d}), Tensor(Shape{b, 1, d}), Tensor(Shape{b, 1}),
                                  Tensor(Shape{b, 1})};
  for (std::size_t i = 0; i < b; ++i) {
    out.scenes.push_back(&data[i].scene);
    const auto x1 = mfplan::gmnprior::normalize(mfplan::gmnprior::trajectory_deltas(data[i].experts[0].waypoints),
                                                m.gmn.norm);
    const auto x0 = mfplan::gmnprior::sample_component(m.gmn, i % m.gmn.k(), rng);
    for (std::size_t j = 0; j < d; ++j) {
      out.x0[i * d + j] = x0[j];
      out.x1[i * d + j] = x1[j];
    }
    const double a = rng.uniform(), c = rng.uniform();
    out.r[i] = std::min(a, c);
    out.t[i] = std::max(a, c);
  }
  return out;
}

}  // namespace fixture
