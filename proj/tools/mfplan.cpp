#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfplan/cli/commands.hpp"
#include "mfplan/synthworld/dataset_io.hpp"

using namespace mfplan;

namespace {

struct ConfigFlags {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", path, "JSON config file");
    app->add_option("--set", overrides, "Override a config key, e.g. --set train.epochs=100");
  }
};

void one_line(std::string& s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfplan: one-step trajectory planning with a mixture prior"};
  app.require_subcommand(1);

  ConfigFlags gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic scenario dataset");
  gen_cfg.attach(gen);
  gen->add_option("-o,--out", gen_out, "Dataset file (JSON lines)")->required();

  std::string fit_data, fit_out;
  std::size_t fit_k = 8;
  std::uint64_t fit_seed = 0;
  auto* fit = app.add_subcommand("fit-gmn", "Fit the mixture prior to a dataset");
  fit->add_option("-d,--data", fit_data)->required();
  fit->add_option("-k,--components", fit_k)->capture_default_str();
  fit->add_option("--seed", fit_seed)->envname("MFPLAN_SEED");
  fit->add_option("-o,--out", fit_out)->required();

  ConfigFlags train_cfg;
  std::string train_data, train_out, train_gmn;
  bool baseline_fm = false;
  auto* train = app.add_subcommand("train", "Train a planner and write a checkpoint");
  train_cfg.attach(train);
  train->add_option("-d,--data", train_data)->required();
  train->add_option("-o,--out", train_out, "Checkpoint path")->required();
  train->add_option("--gmn", train_gmn, "Prior from fit-gmn instead of fitting one");
  train->add_flag("--baseline-fm", baseline_fm, "Train the multi-step flow-matching baseline");

  std::string s_ckpt, s_data, s_out, s_solver, s_svg;
  cli::SampleOptions s_opt;
  std::size_t s_steps = 0, s_component = 0;
  auto* sample = app.add_subcommand("sample", "Draw proposals (and fused trajectories) per scene");
  sample->add_option("--checkpoint", s_ckpt)->required();
  sample->add_option("-d,--data", s_data)->required();
  sample->add_option("-n,--scenes", s_opt.n_scenes, "Number of scenes (0 = all)");
  sample->add_option("-o,--out", s_out)->required();
  auto* solver_opt = sample->add_option("--solver", s_solver, "euler or heun (baseline checkpoints)");
  auto* steps_opt = sample->add_option("--steps", s_steps);
  sample->add_flag("--no-arm", s_opt.no_arm, "Skip fusion; proposals only");
  auto* comp_opt = sample->add_option("--component", s_component, "Draw every proposal from one component");
  sample->add_option("--seed", s_opt.seed)->envname("MFPLAN_SEED");
  sample->add_option("--svg", s_svg, "Write an SVG of the first scene");

  std::string e_samples, e_data, e_out;
  ConfigFlags eval_cfg;
  auto* eval = app.add_subcommand("eval", "Score samples against a dataset");
  eval_cfg.attach(eval);
  eval->add_option("-s,--samples", e_samples)->required();
  eval->add_option("-d,--data", e_data)->required();
  eval->add_option("-o,--out", e_out, "Output prefix")->required();

  std::string b_mf, b_fm, b_data, b_out;
  std::size_t b_scenes = 50, b_reps = 5;
  std::uint64_t b_seed = 0;
  auto* bench = app.add_subcommand("bench", "Compare one-step sampling with ODE solvers");
  bench->add_option("--meanflow", b_mf)->required();
  bench->add_option("--fm", b_fm)->required();
  bench->add_option("-d,--data", b_data)->required();
  bench->add_option("-o,--out", b_out)->required();
  bench->add_option("-n,--scenes", b_scenes)->capture_default_str();
  bench->add_option("--reps", b_reps, "Timing repetitions (at least 5)")->capture_default_str();
  bench->add_option("--seed", b_seed)->envname("MFPLAN_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      cli::cmd_gen_data(cli::resolve_config(gen_cfg.path, gen_cfg.overrides), gen_out);
    } else if (*fit) {
      cli::cmd_fit_gmn(fit_data, fit_k, fit_seed, fit_out);
    } else if (*train) {
      cli::cmd_train(cli::resolve_config(train_cfg.path, train_cfg.overrides), train_data, train_out, baseline_fm,
                     train_gmn);
    } else if (*sample) {
      if (*solver_opt) s_opt.solver = flowbase::parse_method(s_solver);
      if (*steps_opt) s_opt.steps = s_steps;
      if (*comp_opt) s_opt.component = s_component;
      const auto records = cli::cmd_sample(s_ckpt, s_data, s_opt, s_out);
      if (!s_svg.empty() && !records.empty()) {
        cli::write_svg(s_svg, synthworld::load_dataset(s_data).front(), records.front());
      }
    } else if (*eval) {
      const auto cfg = cli::resolve_config(eval_cfg.path, eval_cfg.overrides);
      const auto sum = cli::cmd_eval(e_samples, e_data, e_out, cfg);
      std::cout << cli::to_json(sum).dump(2) << "\n";
    } else if (*bench) {
      for (const auto& r : cli::cmd_bench(b_mf, b_fm, b_data, b_out, b_scenes, b_reps, b_seed)) {
        std::printf("%-11s nfe %zu  median %.3g s/scene  energy distance %.4f\n", r.method.c_str(), r.nfe,
                    r.median_seconds, r.energy_distance);
      }
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    one_line(msg);
    std::fprintf(stderr, "mfplan: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
