#include "mfplan/core/error.hpp"
#include "mfplan/meanflow/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "mfplan/diffkit/optim.hpp"

namespace mfplan::meanflow {

using namespace diffkit;

Var meanflow_loss(Graph& g, const PlannerModel& model, const FlowBatch& batch, LossVariant variant) {
  const std::size_t b = batch.scenes.size();
  Tensor z(batch.x0.shape()), v(batch.x0.shape());
  const std::size_t per = batch.x0.size() / b;
  for (std::size_t i = 0; i < batch.x0.size(); ++i) {
    const double t = batch.t[i / per];
    z[i] = (1.0 - t) * batch.x1[i] + t * batch.x0[i];
    v[i] = batch.x0[i] - batch.x1[i];
  }
  Var zin = g.input(z, v);
  Var rin = g.input(batch.r);
  Var tin = g.input(batch.t, Tensor(batch.t.shape(), 1.0));
  Var ctx = model.encoder(g, batch.scenes);
  Var u = model.decoder(g, zin, rin, tin, ctx);
  const Tensor du = u.has_tangent() ? u.tangent() : Tensor(u.shape());
  return flow_loss(u, target_from_derivative(v, du, batch.r, batch.t), variant);
}

Objective meanflow_objective() {
  return Objective{[](Rng& rng, const TrainConfig& cfg) { return sample_time_pair(rng, cfg.p_equal); },
                   [](Graph& g, const PlannerModel& m, const FlowBatch& b, const TrainConfig& cfg) {
                     return meanflow_loss(g, m, b, cfg.loss_variant);
                   }};
}

Trainer::Trainer(PlannerModel& model, const std::vector<synthworld::Scenario>& data, TrainConfig cfg,
                 std::uint64_t seed, Objective objective)
    : model_(model), cfg_(cfg), objective_(std::move(objective)), rng_(seed) {
  if (data.empty()) throw ArgumentError("training set is empty");
  if (cfg_.batch == 0) throw ArgumentError("batch size must be positive");
  for (const auto& s : data) {
    Item it{&s, {}, {}};
    for (const auto& e : s.experts) {
      if (e.waypoints.size() != model_.cfg.horizon) {
        throw ArgumentError("scenario " + s.scenario_id + ": expert length does not match the model horizon");
      }
      it.normalized.push_back(gmnprior::normalize(gmnprior::trajectory_deltas(e.waypoints), model_.gmn.norm));
      it.component.push_back(gmnprior::nearest_component(model_.gmn, it.normalized.back()));
    }
    items_.push_back(std::move(it));
  }
}

std::size_t Trainer::steps_per_epoch() const { return (items_.size() + cfg_.batch - 1) / cfg_.batch; }

std::size_t Trainer::pick_expert(const Item& item) {
  const std::size_t n = item.normalized.size();
  if (n == 1) return 0;
  if (rng_.uniform() < cfg_.primary_expert_prob) return 0;
  return 1 + rng_.index(n - 1);
}

EpochMetrics Trainer::run_epoch() {
  const std::size_t d = model_.cfg.dim();
  const std::size_t k = model_.gmn.k();
  const std::size_t total_steps = cfg_.epochs * steps_per_epoch();
  const std::size_t warmup = cfg_.warmup_epochs * steps_per_epoch();
  const bool train_arm = model_.arm && cfg_.lambda_tau > 0.0;
  const bool train_flow = cfg_.lambda_flow > 0.0;

  std::vector<std::size_t> order(items_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.index(i)]);

  EpochMetrics m;
  m.epoch = ++epoch_;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch) {
    const std::size_t b = std::min(cfg_.batch, order.size() - start);
    FlowBatch batch{{}, Tensor(Shape{b, 1, d}), Tensor(Shape{b, 1, d}), Tensor(Shape{b, 1}), Tensor(Shape{b, 1})};
    Tensor proposals_noise(Shape{b, k, d});
    Tensor expert_wp(Shape{b, d});
    for (std::size_t i = 0; i < b; ++i) {
      const Item& item = items_[order[start + i]];
      const std::size_t e = pick_expert(item);
      batch.scenes.push_back(&item.scenario->scene);
      const Vector x0 = gmnprior::sample_component(model_.gmn, item.component[e], rng_);
      std::copy(x0.begin(), x0.end(), batch.x0.data().begin() + i * d);
      std::copy(item.normalized[e].begin(), item.normalized[e].end(), batch.x1.data().begin() + i * d);
      const TimePair tp = objective_.sample_times(rng_, cfg_);
      batch.r[i] = tp.r;
      batch.t[i] = tp.t;
      const auto& wp = item.scenario->experts[e].waypoints;
      for (std::size_t j = 0; j < wp.size(); ++j) {
        expert_wp[i * d + 2 * j] = wp[j].x;
        expert_wp[i * d + 2 * j + 1] = wp[j].y;
      }
      if (train_arm) {
        for (std::size_t c = 0; c < k; ++c) {
          const Vector n = gmnprior::sample_component(model_.gmn, c, rng_);
          std::copy(n.begin(), n.end(), proposals_noise.data().begin() + (i * k + c) * d);
        }
      }
    }

    Graph g(&model_.params);
    Var flow = objective_.loss(g, model_, batch, cfg_);
    Var total;
    if (train_flow) total = scale(flow, cfg_.lambda_flow);
    double tau_value = 0.0;
    if (train_arm) {
      const Tensor proposals = one_step(model_, batch.scenes, proposals_noise);
      Var fused = (*model_.arm)(g, g.constant(proposals), batch.scenes);
      Var tau = arm::arm_loss(arm::to_waypoints(g, fused, model_.gmn.norm), g.constant(expert_wp));
      tau_value = tau.value().item();
      Var weighted = scale(tau, cfg_.lambda_tau);
      total = total.valid() ? add(total, weighted) : weighted;
    }
    const double flow_value = flow.value().item();
    m.flow += flow_value;
    m.tau += tau_value;
    m.total += arm::total_loss(tau_value, flow_value, 0.0, train_arm ? cfg_.lambda_tau : 0.0,
                               train_flow ? cfg_.lambda_flow : 0.0, cfg_.lambda_map);
    ++batches;
    if (total.valid()) {
      backward(total, model_.params);
      AdamWConfig opt;
      opt.lr = cosine_lr(step_, total_steps, cfg_.lr, warmup);
      opt.weight_decay = cfg_.weight_decay;
      adamw_step(model_.params, opt);
    }
    ++step_;
  }
  m.flow /= static_cast<double>(batches);
  m.tau /= static_cast<double>(batches);
  m.total /= static_cast<double>(batches);
  return m;
}

std::vector<EpochMetrics> Trainer::fit(const std::function<void(const EpochMetrics&)>& on_epoch) {
  std::vector<EpochMetrics> out;
  while (epoch_ < cfg_.epochs) {
    out.push_back(run_epoch());
    if (on_epoch) on_epoch(out.back());
  }
  return out;
}

}  // namespace mfplan::meanflow
