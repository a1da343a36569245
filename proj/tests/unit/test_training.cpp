// Short end-to-end training runs on synthetic data.

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mfplan/evalkit/metrics.hpp"
#include "../support/fixtures.hpp"

using namespace mfplan;
using namespace mfplan::meanflow;

namespace {

TrainConfig fast_schedule(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.lr = 1e-3;
  return c;
}

double fused_l1(const Trajectory& a, const Trajectory& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    s += std::abs(a.waypoints[i].x - b.waypoints[i].x) + std::abs(a.waypoints[i].y - b.waypoints[i].y);
  }
  return s / static_cast<double>(2 * a.waypoints.size());
}

}  // namespace

TEST_CASE("a point-mass dataset collapses every proposal onto the expert") {
  const auto base = fixture::scenes(1, 2, 41).front();
  std::vector<synthworld::Scenario> data;
  for (int i = 0; i < 100; ++i) {
    auto s = base;
    s.scenario_id = "copy-" + std::to_string(i);
    data.push_back(s);
  }
  auto m = fixture::model(ModelKind::meanflow, data, 8, 3, ModelConfig{});
  Trainer(m, data, fast_schedule(120), 5).fit();

  const auto& expert = base.experts.front();
  double worst = 0.0, best_tau = 1e9;
  std::vector<gmnprior::Vector> normalized;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto props = one_step_sample(m, base.scene, seed);
    REQUIRE(props.size() == 8);
    for (const auto& p : props) {
      worst = std::max(worst, evalkit::mean_l2(p.trajectory, expert));
      best_tau = std::min(best_tau, fused_l1(p.trajectory, expert));
    }
    if (seed == 0) {
      for (const auto& p : props) normalized.push_back(p.normalized);
    }
  }
  MESSAGE("worst proposal L2 " << worst);
  CHECK(worst < 0.1);

  // Fusing a unanimous set does not move it away from the expert.
  const auto fused = arm::fuse(*m.arm, m.params, normalized, base.scene, m.gmn.norm);
  MESSAGE("fused L1 " << fused_l1(fused.trajectory, expert) << " best proposal L1 " << best_tau);
  CHECK(fused_l1(fused.trajectory, expert) <= best_tau + 0.05);
}

TEST_CASE("proposals on fork scenes do not collapse to one mode") {
  const auto data = fixture::scenes(100, 0, 42);
  auto m = fixture::model(ModelKind::meanflow, data, 8, 4, ModelConfig{});
  Trainer(m, data, fast_schedule(120), 6).fit();
  std::size_t collapsed = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto props = one_step_sample(m, data[i].scene, 100 + i);
    double spread = 0.0;
    for (const auto& a : props) {
      for (const auto& b : props) spread = std::max(spread, evalkit::mean_l2(a.trajectory, b.trajectory));
    }
    collapsed += spread <= 0.1;
  }
  CHECK(collapsed == 0);
}

TEST_CASE("a hand-designed mixture still covers the fork modes") {
  const auto data = fixture::scenes(200, 0, 43);
  const auto fitted = gmnprior::gmn_from_dataset(data, 8, 1);
  std::vector<gmnprior::ManualTemplate> templates;
  for (double v : {4.0, 6.5, 9.0, 11.5}) {
    for (double yaw : {-0.12, 0.12}) templates.push_back({v, yaw});
  }
  ModelConfig mc;
  auto m = PlannerModel::create(ModelKind::meanflow, mc, gmnprior::manual_gmn(templates, 0.2, fitted.norm, 8, 0.5), 7);
  Trainer(m, data, fast_schedule(300), 8).fit();
  double recall = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<Trajectory> props;
    for (const auto& p : one_step_sample(m, data[i].scene, 1000 + i)) props.push_back(p.trajectory);
    recall += evalkit::mode_recall(props, data[i].experts, 0.5);
  }
  recall /= static_cast<double>(data.size());
  MESSAGE("manual-mixture mode recall " << recall);
  CHECK(recall >= 0.9);
}
