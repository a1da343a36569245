#include "mfplan/core/error.hpp"
#include "mfplan/flowbase/flow_matching.hpp"

#include <algorithm>
#include <chrono>

#include "mfplan/evalkit/metrics.hpp"

namespace mfplan::flowbase {

using namespace diffkit;

const char* to_string(Method m) { return m == Method::euler ? "euler" : "heun"; }

Method parse_method(const std::string& s) {
  if (s == "euler") return Method::euler;
  if (s == "heun") return Method::heun;
  throw ArgumentError("unknown solver '" + s + "' (expected euler or heun)");
}

OdeResult ode_sample(const VelocityField& v, const Tensor& x0, const SolverConfig& solver) {
  if (solver.n_steps == 0) throw ArgumentError("solver needs at least one step");
  const double h = 1.0 / static_cast<double>(solver.n_steps);
  OdeResult res{x0, 0};
  for (std::size_t i = 0; i < solver.n_steps; ++i) {
    const double t = static_cast<double>(i) * h;
    const Tensor k1 = v(res.x1, t);
    ++res.nfe;
    if (solver.method == Method::euler) {
      res.x1 = res.x1 + h * k1;
    } else {
      const Tensor k2 = v(res.x1 + h * k1, t + h);
      ++res.nfe;
      res.x1 = res.x1 + (0.5 * h) * (k1 + k2);
    }
    res.x1.require_finite("ode_sample");
  }
  return res;
}

OdeResult ode_sample(const meanflow::PlannerModel& model, const std::vector<const synthworld::SceneContext*>& scenes,
                     const Tensor& x0, const SolverConfig& solver) {
  return ode_sample([&](const Tensor& z, double t) { return model.evaluate(scenes, z, 0.0, t); }, x0, solver);
}

Var vanilla_fm_loss(Graph& g, const meanflow::PlannerModel& model, const meanflow::FlowBatch& batch) {
  const std::size_t b = batch.scenes.size();
  Tensor z(batch.x0.shape()), v(batch.x0.shape());
  const std::size_t per = batch.x0.size() / b;
  for (std::size_t i = 0; i < batch.x0.size(); ++i) {
    const double t = batch.t[i / per];
    z[i] = (1.0 - t) * batch.x0[i] + t * batch.x1[i];
    v[i] = batch.x1[i] - batch.x0[i];
  }
  Var ctx = model.encoder(g, batch.scenes);
  Var pred = model.decoder(g, g.constant(std::move(z)), g.constant(batch.r), g.constant(batch.t), ctx);
  return mean_square(sub(pred, g.constant(std::move(v))));
}

meanflow::Objective fm_objective() {
  return meanflow::Objective{
      [](Rng& rng, const meanflow::TrainConfig&) { return meanflow::TimePair{0.0, rng.uniform()}; },
      [](Graph& g, const meanflow::PlannerModel& m, const meanflow::FlowBatch& b, const meanflow::TrainConfig&) {
        return vanilla_fm_loss(g, m, b);
      }};
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> compare_nfe(const meanflow::PlannerModel& meanflow_model, const meanflow::PlannerModel& fm_model,
                                  const std::vector<synthworld::Scenario>& scenes, std::size_t reps,
                                  std::uint64_t seed) {
  if (scenes.empty()) throw ArgumentError("compare_nfe: no scenes");
  reps = std::max<std::size_t>(reps, 1);
  struct Config {
    std::string name;
    const meanflow::PlannerModel* model;
    bool one_step;
    SolverConfig solver;
  };
  const std::vector<Config> grid{{"meanflow-1", &meanflow_model, true, {}},
                                 {"euler-1", &fm_model, false, {Method::euler, 1}},
                                 {"euler-5", &fm_model, false, {Method::euler, 5}},
                                 {"heun-5", &fm_model, false, {Method::heun, 5}}};
  std::vector<gmnprior::Vector> experts;
  for (const auto& s : scenes) {
    for (const auto& e : s.experts) experts.push_back(arm::flatten(e));
  }
  std::vector<BenchRow> rows;
  for (const auto& c : grid) {
    const auto& model = *c.model;
    const std::size_t d = model.cfg.dim();
    std::vector<double> per_scene;
    std::vector<gmnprior::Vector> samples;
    std::size_t nfe = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      double elapsed = 0.0;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto draws = meanflow::draw_noise(model.gmn, mix_seed(seed, i));
        Tensor z(Shape{1, draws.size(), d});
        for (std::size_t k = 0; k < draws.size(); ++k) {
          std::copy(draws[k].second.begin(), draws[k].second.end(), z.data().begin() + k * d);
        }
        const std::vector<const synthworld::SceneContext*> ctx{&scenes[i].scene};
        const auto t0 = std::chrono::steady_clock::now();
        Tensor x1;
        if (c.one_step) {
          x1 = meanflow::one_step(model, ctx, z);
          nfe = 1;
        } else {
          auto r = ode_sample(model, ctx, z, c.solver);
          x1 = std::move(r.x1);
          nfe = r.nfe;
        }
        elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (rep == 0) {
          for (std::size_t k = 0; k < draws.size(); ++k) {
            gmnprior::Vector v(x1.data().begin() + k * d, x1.data().begin() + (k + 1) * d);
            samples.push_back(arm::flatten(arm::to_trajectory(v, model.gmn.norm)));
          }
        }
      }
      per_scene.push_back(elapsed / static_cast<double>(scenes.size()));
    }
    rows.push_back({c.name, nfe, median(per_scene), evalkit::energy_distance(samples, experts)});
  }
  return rows;
}

}  // namespace mfplan::flowbase
