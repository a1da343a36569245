// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
// usage: acceptance [work-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "mfplan/cli/commands.hpp"
#include "mfplan/diffkit/layers.hpp"
#include "mfplan/synthworld/dataset_io.hpp"
#include "../support/oracles.hpp"

using namespace mfplan;
using namespace mfplan::diffkit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared training setup for the learned criteria.
cli::Config trained_config(std::size_t family, double lambda_tau) {
  cli::Config c;
  c.seed = 11;
  c.world.n_scenarios = 200;
  c.world.family_mix = {0, 0, 0, 0};
  c.world.family_mix[family] = 1.0;
  c.model.components = 8;
  c.train.epochs = 400;
  c.train.lr = 1e-3;
  c.train.lambda_tau = lambda_tau;
  c.eval.grid_resolution = 100;
  return c;
}

// A random network of the kind the decoder is built from: a time embedding,
// a stack of linear layers with mixed activations and normalization, and a
// softmax gate.
struct RandomNet {
  ParamStore ps;
  std::size_t dim = 0;
  std::vector<Linear> layers;
  std::vector<int> acts;
  Linear time;
  LayerNorm norm;

  explicit RandomNet(std::uint64_t seed) {
    Rng rng(seed);
    dim = 2 + rng.index(5);
    const std::size_t hidden = 4 + rng.index(9);
    const std::size_t depth = 1 + rng.index(3);
    std::size_t in = dim;
    for (std::size_t l = 0; l < depth; ++l) {
      layers.push_back(Linear::create(ps, "l" + std::to_string(l), in, hidden, rng));
      acts.push_back(static_cast<int>(rng.index(4)));
      in = hidden;
    }
    layers.push_back(Linear::create(ps, "out", hidden, dim, rng));
    time = Linear::create(ps, "time", 4, hidden, rng);
    norm = LayerNorm::create(ps, "norm", hidden);
    for (auto& slot : ps.slots()) {
      for (double& w : slot.value.data()) w += 0.3 * rng.normal();
    }
  }

  Var operator()(Graph& g, const Var& z, const Var& r, const Var& t) const {
    auto rt = concat({sin(r), cos(r), sin(t), cos(t)}, 1);
    Var h = z;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      h = layers[l](g, h);
      if (l == 0) h = add(h, time(g, rt));
      switch (acts[l]) {
        case 0: h = gelu(h); break;
        case 1: h = relu(h); break;
        case 2: h = sin(h); break;
        default: h = mul(softmax(h), h); break;
      }
    }
    h = norm(g, h);
    return layers.back()(g, h);
  }
};

void autodiff_oracle() {
  const auto t0 = Clock::now();
  double worst_grad = 0.0, worst_jvp = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomNet net(seed);
    Rng rng(100 + seed);
    const std::size_t b = 3;
    const Tensor z = oracle::random_tensor({b, net.dim}, rng);
    Tensor r(Shape{b, 1}), t(Shape{b, 1});
    for (std::size_t i = 0; i < b; ++i) {
      const double a = rng.uniform(), c = rng.uniform();
      r[i] = std::min(a, c);
      t[i] = std::max(a, c);
    }
    const Tensor target = oracle::random_tensor({b, net.dim}, rng);
    worst_grad = std::max(worst_grad, oracle::gradient_error(net.ps, [&](Graph& g) {
      return mean_square(sub(net(g, g.constant(z), g.constant(r), g.constant(t)), g.constant(target)));
    }));
    const TimeFunction f = [&](Graph& g, const Var& zz, const Var& rr, const Var& tt) { return net(g, zz, rr, tt); };
    const Tensor dz = oracle::random_tensor(z.shape(), rng);
    const Tensor dr = oracle::random_tensor(r.shape(), rng, 0.5);
    const Tensor dt = oracle::random_tensor(t.shape(), rng, 0.5);
    worst_jvp = std::max(worst_jvp, oracle::jvp_error(f, z, r, t, dz, dr, dt, &net.ps));
  }
  const double elapsed = seconds_since(t0);
  report(1, "autodiff oracle", worst_grad < 1e-4 && worst_jvp < 1e-4 && elapsed < 30.0,
         fmt("20 networks, worst gradient rel err %.2e, worst jvp rel err %.2e, %.1f s", worst_grad, worst_jvp,
             elapsed));
}

void target_closure() {
  const auto t0 = Clock::now();
  const TimeFunction u = [](Graph& g, const Var& z, const Var& r, const Var& t) {
    return add(mul(z, g.constant(Tensor(z.shape(), 0.0))), add(t, r));
  };
  Rng rng(17);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    const double r = std::min(a, b), t = std::max(a, b);
    const Tensor tgt = meanflow::meanflow_target(u, Tensor::vector({rng.normal()}), Tensor::vector({r}),
                                                 Tensor::vector({t}), Tensor::vector({2 * t}));
    const double mean_velocity = r == t ? 2 * t : (t * t - r * r) / (t - r);
    worst = std::max(worst, std::abs(tgt[0] - mean_velocity));
  }

  ParamStore ps;
  ps.add("w", oracle::random_tensor({1, 3}, rng));
  const TimeFunction nl = [](Graph& g, const Var& z, const Var& r, const Var& t) {
    return mul(gelu(mul(z, g.param("w"))), add(mul(t, t), cos(r)));
  };
  bool exact = true;
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform();
    const Tensor v = oracle::random_tensor({1, 3}, rng);
    exact = exact && meanflow::meanflow_target(nl, oracle::random_tensor({1, 3}, rng), Tensor::vector({s}),
                                               Tensor::vector({s}), v, &ps) == v;
  }
  const double elapsed = seconds_since(t0);
  report(2, "mean-velocity target closure", worst < 1e-9 && exact && elapsed < 5.0,
         fmt("100 pairs, worst abs err %.2e, r=t bit-exact %s, %.2f s", worst, exact ? "yes" : "no", elapsed));
}

struct Fidelity {
  double l2 = 0.0;
  std::vector<gmnprior::Vector> samples;
};

// 256 one-step or Euler-5 samples, each from the prior component nearest to
// the scene's expert.
Fidelity routed_samples(const meanflow::PlannerModel& m, const std::vector<synthworld::Scenario>& data) {
  Fidelity out;
  const std::size_t d = m.cfg.dim();
  for (std::size_t j = 0; j < 256; ++j) {
    const auto& s = data[j % data.size()];
    const auto expert = gmnprior::normalize(gmnprior::trajectory_deltas(s.experts[0].waypoints), m.gmn.norm);
    const auto draws = meanflow::draw_noise(m.gmn, 7000 + j, gmnprior::nearest_component(m.gmn, expert), 1);
    Tensor z(Shape{1, 1, d});
    std::copy(draws[0].second.begin(), draws[0].second.end(), z.data().begin());
    const std::vector<const synthworld::SceneContext*> ctx{&s.scene};
    const Tensor x = m.kind == meanflow::ModelKind::meanflow
                         ? meanflow::one_step(m, ctx, z)
                         : flowbase::ode_sample(m, ctx, z, {flowbase::Method::euler, 5}).x1;
    const auto traj = arm::to_trajectory(gmnprior::Vector(x.data().begin(), x.data().end()), m.gmn.norm);
    out.l2 += evalkit::mean_l2(traj, s.experts[0]) / 256.0;
    out.samples.push_back(arm::flatten(traj));
  }
  return out;
}

void one_step_fidelity(const fs::path& dir) {
  const auto cfg = trained_config(2, 0.0);
  cli::cmd_gen_data(cfg, dir / "slalom.jsonl");
  auto t0 = Clock::now();
  cli::cmd_train(cfg, dir / "slalom.jsonl", dir / "slalom-mf.ckpt", false);
  const double train_mf = seconds_since(t0);
  t0 = Clock::now();
  cli::cmd_train(cfg, dir / "slalom.jsonl", dir / "slalom-fm.ckpt", true);
  const double train_fm = seconds_since(t0);

  const auto data = synthworld::load_dataset(dir / "slalom.jsonl");
  const auto mf = routed_samples(cli::load_checkpoint(dir / "slalom-mf.ckpt").model, data);
  const auto fm = routed_samples(cli::load_checkpoint(dir / "slalom-fm.ckpt").model, data);
  std::vector<gmnprior::Vector> experts;
  for (const auto& s : data) experts.push_back(arm::flatten(s.experts[0]));
  const double ed_mf = evalkit::energy_distance(mf.samples, experts);
  const double ed_fm = evalkit::energy_distance(fm.samples, experts);
  report(3, "one-step fidelity", train_mf <= 300.0 && mf.l2 < 0.15 && ed_mf <= 1.5 * ed_fm,
         fmt("slalom, one-step L2 %.3f m (fm euler-5 %.3f), energy distance %.4f vs %.4f (ratio %.3f), "
             "training %.0f s / %.0f s",
             mf.l2, fm.l2, ed_mf, ed_fm, ed_mf / ed_fm, train_mf, train_fm));
}

void learned_fork_criteria(const fs::path& dir) {
  auto cfg = trained_config(0, cli::Config{}.train.lambda_tau);
  cli::cmd_gen_data(cfg, dir / "fork.jsonl");
  cli::cmd_train(cfg, dir / "fork.jsonl", dir / "fork-gmn.ckpt", false);
  auto gauss = cfg;
  gauss.prior = cli::PriorKind::gaussian;
  cli::cmd_train(gauss, dir / "fork.jsonl", dir / "fork-gauss.ckpt", false);

  cli::SampleOptions opt;
  opt.seed = 1000;
  const auto fused = cli::cmd_sample(dir / "fork-gmn.ckpt", dir / "fork.jsonl", opt, dir / "fork-gmn.samples.jsonl");
  cli::cmd_sample(dir / "fork-gauss.ckpt", dir / "fork.jsonl", opt, dir / "fork-gauss.samples.jsonl");
  opt.no_arm = true;
  cli::cmd_sample(dir / "fork-gmn.ckpt", dir / "fork.jsonl", opt, dir / "fork-gmn.raw.jsonl");

  const auto gmn = cli::cmd_eval(dir / "fork-gmn.samples.jsonl", dir / "fork.jsonl", dir / "fork-gmn.eval", cfg);
  const auto gau = cli::cmd_eval(dir / "fork-gauss.samples.jsonl", dir / "fork.jsonl", dir / "fork-gauss.eval", cfg);
  const auto avg = cli::cmd_eval(dir / "fork-gmn.raw.jsonl", dir / "fork.jsonl", dir / "fork-gmn.raw.eval", cfg);

  report(4, "mode coverage", gmn.recall_05 >= 0.9 && gmn.recall_05 > gau.recall_05,
         fmt("fork, recall@0.5 with mixture prior %.3f, with standard gaussian %.3f", gmn.recall_05, gau.recall_05));

  const synthworld::Trajectory line = [] {
    synthworld::Trajectory t;
    for (int i = 1; i <= 8; ++i) t.waypoints.push_back({2.0 * i, 0.0});
    return t;
  }();
  synthworld::Trajectory shifted = line;
  for (auto& w : shifted.waypoints) w.y += 0.9;
  const double d_same = evalkit::multimodality_d(std::vector<synthworld::Trajectory>(8, line));
  const double d_half = evalkit::multimodality_d({line, shifted});
  report(5, "multimodality metric", gmn.d > gau.d && d_same == 0.0 && std::abs(d_half - 2.0 / 3.0) <= 0.01,
         fmt("fork D mixture %.4f vs gaussian %.4f, identical %.1f, half overlap %.4f", gmn.d, gau.d, d_same, d_half));

  const auto ck = cli::load_checkpoint(dir / "fork-gmn.ckpt");
  const auto data = synthworld::load_dataset(dir / "fork.jsonl");
  const auto& scene = data[0];
  std::vector<gmnprior::Vector> props;
  for (const auto& p : fused[0].proposals) {
    props.push_back(gmnprior::normalize(gmnprior::trajectory_deltas(p.waypoints), ck.model.gmn.norm));
  }
  const auto base = arm::fuse(*ck.model.arm, ck.model.params, props, scene.scene, ck.model.gmn.norm);
  const double wsum = std::accumulate(base.weights.begin(), base.weights.end(), 0.0);
  double worst = 0.0;
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<gmnprior::Vector> shuffled = props;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    const auto f = arm::fuse(*ck.model.arm, ck.model.params, shuffled, scene.scene, ck.model.gmn.norm);
    for (std::size_t i = 0; i < f.trajectory.waypoints.size(); ++i) {
      worst = std::max({worst, std::abs(f.trajectory.waypoints[i].x - base.trajectory.waypoints[i].x),
                        std::abs(f.trajectory.waypoints[i].y - base.trajectory.waypoints[i].y)});
    }
  }
  report(6, "fusion vs averaging", gmn.score - avg.score >= 10.0 && std::abs(wsum - 1.0) <= 1e-10 && worst <= 1e-9,
         fmt("fork drive score fused %.1f, averaged %.1f, weight sum %.15f, 100 permutations max diff %.1e",
             gmn.score, avg.score, wsum, worst));
}

void nfe_and_convergence(const fs::path& dir) {
  const auto rows = cli::cmd_bench(dir / "slalom-mf.ckpt", dir / "slalom-fm.ckpt", dir / "slalom.jsonl",
                                   dir / "bench.tsv", 50, 5, 3);
  const auto find = [&](const std::string& m) {
    for (const auto& r : rows) {
      if (r.method == m) return r;
    }
    return flowbase::BenchRow{};
  };
  const auto one = find("meanflow-1"), e5 = find("euler-5");

  const flowbase::VelocityField exp_field = [](const Tensor& z, double) { return z; };
  std::vector<double> err;
  for (std::size_t n = 1; n <= 16; n *= 2) {
    const auto res = flowbase::ode_sample(exp_field, Tensor::vector({1.0}), {flowbase::Method::euler, n});
    err.push_back(std::abs(res.x1[0] - std::exp(1.0)));
  }
  bool halves = true, strict = true;
  std::string ratios;
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double q = err[i] / err[i - 1];
    halves = halves && q >= 0.3 && q <= 0.7;
    strict = strict && q >= 0.4 && q <= 0.6;
    ratios += fmt("%s%.3f", i > 1 ? " " : "", q);
  }
  report(7, "one-step cost", one.nfe == 1 && one.median_seconds < e5.median_seconds && halves,
         fmt("nfe %zu vs %zu, median %.2e s vs %.2e s per scene; euler error ratios %s (within 0.5+-0.2: %s, within "
             "0.5+-20%%: %s)",
             one.nfe, e5.nfe, one.median_seconds, e5.median_seconds, ratios.c_str(), halves ? "yes" : "no",
             strict ? "yes" : "no"));
}

void determinism(const fs::path& dir) {
  cli::Config cfg;
  cfg.seed = 23;
  cfg.world.n_scenarios = 60;
  cfg.train.epochs = 4;
  cfg.train.lr = 1e-3;
  bool ok = true;
  std::string detail;
  const auto same = [&](const fs::path& a, const fs::path& b, const char* what) {
    const bool eq = slurp(a) == slurp(b) && !slurp(a).empty();
    detail += fmt("%s%s %s", detail.empty() ? "" : ", ", what, eq ? "identical" : "DIFFER");
    ok = ok && eq;
  };
  cli::cmd_gen_data(cfg, dir / "det-a.jsonl");
  cli::cmd_gen_data(cfg, dir / "det-b.jsonl");
  same(dir / "det-a.jsonl", dir / "det-b.jsonl", "datasets");
  cli::cmd_train(cfg, dir / "det-a.jsonl", dir / "det-a.ckpt", false);
  cli::cmd_train(cfg, dir / "det-a.jsonl", dir / "det-b.ckpt", false);
  same(dir / "det-a.ckpt.loss.tsv", dir / "det-b.ckpt.loss.tsv", "loss curves");
  same(dir / "det-a.ckpt", dir / "det-b.ckpt", "checkpoints");
  cli::SampleOptions opt;
  opt.seed = 5;
  cli::cmd_sample(dir / "det-a.ckpt", dir / "det-a.jsonl", opt, dir / "det-a.samples.jsonl");
  cli::cmd_sample(dir / "det-b.ckpt", dir / "det-a.jsonl", opt, dir / "det-b.samples.jsonl");
  same(dir / "det-a.samples.jsonl", dir / "det-b.samples.jsonl", "samples");

  const std::string bytes = slurp(dir / "det-a.ckpt");
  const auto ck = cli::decode_checkpoint(bytes);
  bool bit_exact = cli::encode_checkpoint(ck.model, ck.config) == bytes;
  cli::Checkpoint again = cli::decode_checkpoint(bytes);
  for (std::size_t s = 0; s < ck.model.params.size(); ++s) {
    bit_exact = bit_exact && ck.model.params.slot(s).value == again.model.params.slot(s).value;
  }
  detail += fmt(", checkpoint round trip %s", bit_exact ? "bit-exact" : "DIFFERS");
  report(8, "determinism and persistence", ok && bit_exact, detail);
}

void mixture_construction() {
  Rng rng(31);
  std::vector<gmnprior::Vector> points;
  gmnprior::Vector ma(16, 0.0), mb(16, 0.0);
  for (int i = 0; i < 100; ++i) {
    gmnprior::Vector p(16);
    const double c = i < 50 ? 4.0 : -4.0;
    for (double& x : p) x = c + 0.3 * rng.normal();
    auto& m = i < 50 ? ma : mb;
    for (std::size_t j = 0; j < 16; ++j) m[j] += p[j] / 50.0;
    points.push_back(p);
  }
  const auto km = gmnprior::kmeans(points, 2, 4);
  const bool swap = km.means[0][0] < 0.0;
  double mean_err = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    mean_err = std::max({mean_err, std::abs(km.means[swap ? 1 : 0][j] - ma[j]),
                         std::abs(km.means[swap ? 0 : 1][j] - mb[j])});
  }

  std::vector<std::vector<geom::Vec2>> deltas;
  for (int t = 0; t < 100; ++t) {
    std::vector<geom::Vec2> d;
    for (int i = 0; i < 8; ++i) d.push_back({rng.uniform(0.0, 3.0), 0.4 * rng.normal()});
    deltas.push_back(d);
  }
  const auto norm = gmnprior::fit_normalization(deltas);
  double round_trip = 0.0;
  for (const auto& d : deltas) {
    const auto back = gmnprior::denormalize(gmnprior::normalize(d, norm), norm);
    for (std::size_t i = 0; i < d.size(); ++i) {
      round_trip = std::max({round_trip, std::abs(back[i].x - d[i].x), std::abs(back[i].y - d[i].y)});
    }
  }

  gmnprior::GaussianMixtureNoise g;
  for (int k = 0; k < 8; ++k) {
    gmnprior::Vector m(16);
    for (double& x : m) x = rng.normal();
    g.means.push_back(m);
    g.sigmas.push_back(0.2);
    g.weights.push_back(1.0);
  }
  std::size_t agree = 0;
  for (int q = 0; q < 1000; ++q) {
    gmnprior::Vector x(16);
    for (double& v : x) v = 1.5 * rng.normal();
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t k = 0; k < g.k(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < 16; ++j) s += (x[j] - g.means[k][j]) * (x[j] - g.means[k][j]);
      if (s < bd) bd = s, best = k;
    }
    agree += gmnprior::nearest_component(g, x) == best;
  }
  report(9, "mixture construction", mean_err < 1e-6 && round_trip <= 1e-12 && agree == 1000,
         fmt("k-means mean error %.1e, normalize round trip %.1e, nearest component %zu/1000", mean_err, round_trip,
             agree));
}

template <class F>
void guarded(int id, const char* name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-work");
  fs::create_directories(dir);
  const auto t0 = Clock::now();
  guarded(1, "autodiff oracle", autodiff_oracle);
  guarded(2, "mean-velocity target closure", target_closure);
  guarded(3, "one-step fidelity", [&] { one_step_fidelity(dir); });
  guarded(4, "learned fork criteria", [&] { learned_fork_criteria(dir); });
  guarded(7, "one-step cost", [&] { nfe_and_convergence(dir); });
  guarded(8, "determinism and persistence", [&] { determinism(dir); });
  guarded(9, "mixture construction", mixture_construction);
  std::printf("%d failed, total %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
