#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mfplan/core/error.hpp"
#include "mfplan/meanflow/trainer.hpp"

namespace mfplan::flowbase {

using diffkit::Tensor;

enum class Method { euler, heun };
const char* to_string(Method m);
Method parse_method(const std::string& s);

struct SolverConfig {
  Method method = Method::euler;
  std::size_t n_steps = 5;
};

using VelocityField = std::function<Tensor(const Tensor& z, double t)>;

struct OdeResult {
  Tensor x1;
  std::size_t nfe = 0;
};

/// Integrates dz/dt = v(z, t) from t = 0 to t = 1 with fixed steps.
OdeResult ode_sample(const VelocityField& v, const Tensor& x0, const SolverConfig& solver);
/// Same, with the velocity given by a flow-matching planner's decoder.
OdeResult ode_sample(const meanflow::PlannerModel& model, const std::vector<const synthworld::SceneContext*>& scenes,
                     const Tensor& x0, const SolverConfig& solver);

/// Squared error between the velocity prediction at z_t = (1 - t) x0 + t x1
/// and v = x1 - x0 (noise at t = 0).
diffkit::Var vanilla_fm_loss(diffkit::Graph& g, const meanflow::PlannerModel& model, const meanflow::FlowBatch& batch);
/// t ~ U(0, 1).
meanflow::Objective fm_objective();

struct BenchRow {
  std::string method;
  std::size_t nfe = 0;
  double median_seconds = 0.0;
  double energy_distance = 0.0;
};

/// Rows meanflow-1, euler-1, euler-5, heun-5: evaluations per sample, median
/// per-scene wall-clock over `reps` passes and the energy distance of the
/// pooled samples (one per prior component and scene) to the pooled experts.
std::vector<BenchRow> compare_nfe(const meanflow::PlannerModel& meanflow_model, const meanflow::PlannerModel& fm_model,
                                  const std::vector<synthworld::Scenario>& scenes, std::size_t reps,
                                  std::uint64_t seed);

}  // namespace mfplan::flowbase
