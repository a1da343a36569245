#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfplan/meanflow/objective.hpp"
#include "mfplan/meanflow/planner.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::meanflow {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 2e-4;
  double weight_decay = 0.1;
  std::size_t warmup_epochs = 3;
  double p_equal = 0.25;
  double lambda_tau = 1.0;
  double lambda_flow = 1.0;
  double lambda_map = 0.0;
  LossVariant loss_variant = LossVariant::l1;
  /// Multi-mode scenes: chance of training on the command-preferred expert;
  /// the remaining modes share the rest uniformly.
  double primary_expert_prob = 0.7;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double flow = 0.0;
  double tau = 0.0;
  double total = 0.0;
};

/// One training batch: raw endpoints and times, one noise query per scene.
struct FlowBatch {
  std::vector<const SceneContext*> scenes;
  Tensor x0;  // [B, 1, dim] noise
  Tensor x1;  // [B, 1, dim] normalized expert deltas
  Tensor r;   // [B, 1]
  Tensor t;   // [B, 1]
};

struct Objective {
  std::function<TimePair(Rng&, const TrainConfig&)> sample_times;
  std::function<diffkit::Var(diffkit::Graph&, const PlannerModel&, const FlowBatch&, const TrainConfig&)> loss;
};

/// Mean-flow loss: the decoder runs once with tangents (v, 0, 1) attached,
/// so the primal output carries gradients and the target comes from the
/// tangent, which never does.
diffkit::Var meanflow_loss(diffkit::Graph& g, const PlannerModel& model, const FlowBatch& batch,
                           LossVariant variant);
Objective meanflow_objective();

class Trainer {
 public:
  Trainer(PlannerModel& model, const std::vector<synthworld::Scenario>& data, TrainConfig cfg, std::uint64_t seed,
          Objective objective = meanflow_objective());

  EpochMetrics run_epoch();
  std::vector<EpochMetrics> fit(const std::function<void(const EpochMetrics&)>& on_epoch = {});

  std::size_t steps_per_epoch() const;
  std::size_t step() const { return step_; }

 private:
  struct Item {
    const synthworld::Scenario* scenario;
    std::vector<Vector> normalized;
    std::vector<std::size_t> component;
  };

  std::size_t pick_expert(const Item& item);

  PlannerModel& model_;
  TrainConfig cfg_;
  Objective objective_;
  Rng rng_;
  std::vector<Item> items_;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

}  // namespace mfplan::meanflow
