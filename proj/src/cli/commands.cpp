#include "mfplan/core/error.hpp"
#include "mfplan/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "mfplan/synthworld/dataset_io.hpp"

namespace mfplan::cli {

using nlohmann::json;
using meanflow::ModelKind;

namespace {

json waypoints_json(const Trajectory& t) {
  json out = json::array();
  for (const auto& p : t.waypoints) out.push_back({p.x, p.y});
  return out;
}

Trajectory waypoints_from(const json& j) {
  Trajectory t;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw std::runtime_error("waypoint must be [x, y]");
    t.waypoints.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return t;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<const Scenario*> take(const std::vector<Scenario>& scenes, std::size_t n) {
  const std::size_t count = n == 0 ? scenes.size() : std::min(n, scenes.size());
  std::vector<const Scenario*> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(&scenes[i]);
  return out;
}

}  // namespace

std::string to_json_line(const SampleRecord& r) {
  json props = json::array();
  for (std::size_t i = 0; i < r.proposals.size(); ++i) {
    props.push_back({{"component", r.components.at(i)}, {"waypoints", waypoints_json(r.proposals[i])}});
  }
  const json j{{"scenario_id", r.scenario_id},
               {"proposals", props},
               {"final", r.final ? waypoints_json(*r.final) : json(nullptr)},
               {"method", r.method}};
  return j.dump();
}

SampleRecord sample_from_json_line(const std::string& line, std::size_t line_no) {
  const std::string where = "samples line " + std::to_string(line_no);
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::runtime_error(where + ": not a JSON object");
  SampleRecord r;
  try {
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    for (const auto& p : j.at("proposals")) {
      r.components.push_back(p.at("component").get<std::size_t>());
      r.proposals.push_back(waypoints_from(p.at("waypoints")));
    }
    if (!j.at("final").is_null()) r.final = waypoints_from(j.at("final"));
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return r;
}

void save_samples(const std::string& path, const std::vector<SampleRecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json_line(r) + "\n";
  write_text_atomic(path, text);
}

std::vector<SampleRecord> load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read samples '" + path + "'");
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty()) out.push_back(sample_from_json_line(line, n));
  }
  return out;
}

std::vector<SampleRecord> sample_scenes(const Checkpoint& ck, const std::vector<Scenario>& scenes,
                                        const SampleOptions& opt) {
  const auto& model = ck.model;
  const bool fm = model.kind == ModelKind::flow_matching;
  if (!fm && (opt.solver || opt.steps)) {
    throw ArgumentError("--solver/--steps apply to flow-matching checkpoints only");
  }
  if (opt.component && *opt.component >= model.gmn.k()) {
    throw ArgumentError("component " + std::to_string(*opt.component) + " out of range (K = " +
                                std::to_string(model.gmn.k()) + ")");
  }
  flowbase::SolverConfig solver;
  if (opt.solver) solver.method = *opt.solver;
  if (opt.steps) solver.n_steps = *opt.steps;
  if (fm && solver.n_steps == 0) throw ArgumentError("--steps must be positive");
  const bool fuse = !fm && !opt.no_arm && model.arm;
  std::string method = fm ? std::string(flowbase::to_string(solver.method)) + "-" + std::to_string(solver.n_steps)
                          : "meanflow-1";
  if (fuse) method += "+arm";

  const std::size_t d = model.cfg.dim();
  std::vector<SampleRecord> out;
  const auto chosen = take(scenes, opt.n_scenes);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const Scenario& s = *chosen[i];
    const auto draws = meanflow::draw_noise(model.gmn, mix_seed(opt.seed, i), opt.component);
    diffkit::Tensor z(diffkit::Shape{1, draws.size(), d});
    for (std::size_t k = 0; k < draws.size(); ++k) {
      std::copy(draws[k].second.begin(), draws[k].second.end(), z.data().begin() + k * d);
    }
    const std::vector<const synthworld::SceneContext*> ctx{&s.scene};
    const diffkit::Tensor x1 = fm ? flowbase::ode_sample(model, ctx, z, solver).x1 : meanflow::one_step(model, ctx, z);

    SampleRecord r;
    r.scenario_id = s.scenario_id;
    r.method = method;
    std::vector<gmnprior::Vector> normalized;
    for (std::size_t k = 0; k < draws.size(); ++k) {
      normalized.emplace_back(x1.data().begin() + k * d, x1.data().begin() + (k + 1) * d);
      r.components.push_back(draws[k].first);
      r.proposals.push_back(arm::to_trajectory(normalized.back(), model.gmn.norm));
    }
    if (fuse) r.final = arm::fuse(*model.arm, model.params, normalized, s.scene, model.gmn.norm).trajectory;
    out.push_back(std::move(r));
  }
  return out;
}

EvalSummary evaluate(const std::vector<SampleRecord>& records, const std::vector<Scenario>& scenes,
                     const EvalConfig& cfg, std::vector<SceneMetrics>* per_scene) {
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenes) by_id.emplace(s.scenario_id, &s);
  const auto box = cfg.box();

  EvalSummary sum;
  std::size_t finals = 0;
  double d_total = 0.0;
  for (const auto& r : records) {
    auto it = by_id.find(r.scenario_id);
    if (it == by_id.end()) throw std::runtime_error("samples reference unknown scenario '" + r.scenario_id + "'");
    if (r.proposals.empty()) throw std::runtime_error("scenario '" + r.scenario_id + "' has no proposals");
    const Scenario& s = *it->second;

    SceneMetrics m;
    m.scenario_id = r.scenario_id;
    m.proposals = r.proposals.size();
    m.scored_final = r.final.has_value();
    m.score = evalkit::drive_score(r.final ? *r.final : arm::average_proposals(r.proposals), s, box);
    if (r.proposals.size() >= 2) m.d = evalkit::multimodality_d(r.proposals, box, cfg.grid_resolution);
    m.recall_02 = evalkit::mode_recall(r.proposals, s.experts, 0.2);
    m.recall_05 = evalkit::mode_recall(r.proposals, s.experts, 0.5);
    m.recall = evalkit::mode_recall(r.proposals, s.experts, cfg.radius);
    m.min_l2 = std::numeric_limits<double>::infinity();
    m.all_off_road = true;
    for (const auto& p : r.proposals) {
      for (const auto& e : s.experts) m.min_l2 = std::min(m.min_l2, evalkit::mean_l2(p, e));
      if (evalkit::drive_score(p, s, box).dac != 0) m.all_off_road = false;
    }

    ++sum.scenes;
    finals += m.scored_final;
    sum.score += m.score.score;
    if (m.d) {
      d_total += *m.d;
      ++sum.d_scenes;
    }
    sum.recall_02 += m.recall_02;
    sum.recall_05 += m.recall_05;
    sum.recall += m.recall;
    sum.all_off_road += m.all_off_road;
    if (per_scene) per_scene->push_back(std::move(m));
  }
  if (sum.scenes == 0) throw std::runtime_error("no samples to evaluate");
  const double n = static_cast<double>(sum.scenes);
  sum.score /= n;
  sum.recall_02 /= n;
  sum.recall_05 /= n;
  sum.recall /= n;
  sum.d = sum.d_scenes > 0 ? d_total / static_cast<double>(sum.d_scenes) : 0.0;
  sum.m_dp = evalkit::m_dp(sum.d, sum.score);
  sum.score_source = finals == sum.scenes ? "final" : finals == 0 ? "proposal_mean" : "mixed";
  return sum;
}

json to_json(const EvalSummary& s) {
  return {{"scenes", s.scenes},
          {"score_source", s.score_source},
          {"score", s.score},
          {"d", s.d},
          {"d_scenes", s.d_scenes},
          {"m_dp", s.m_dp},
          {"mode_recall_0.2", s.recall_02},
          {"mode_recall_0.5", s.recall_05},
          {"mode_recall", s.recall},
          {"all_proposals_off_road", s.all_off_road}};
}

std::vector<SampleRecord> expert_records(const std::vector<Scenario>& scenes) {
  std::vector<SampleRecord> out;
  for (const auto& s : scenes) {
    SampleRecord r;
    r.scenario_id = s.scenario_id;
    r.method = "expert";
    for (std::size_t i = 0; i < s.experts.size(); ++i) r.components.push_back(i);
    r.proposals = s.experts;
    r.final = s.experts.front();
    out.push_back(std::move(r));
  }
  return out;
}

void write_svg(const std::string& path, const Scenario& scene, const SampleRecord& record) {
  // Vehicle frame: x forward to the right, y left drawn upward.
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  auto grow = [&](geom::Vec2 p) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  };
  for (const auto& p : scene.scene.corridor) grow(p);
  for (const auto& t : record.proposals) {
    for (const auto& p : t.waypoints) grow(p);
  }
  const double margin = 2.0, px = 12.0;
  x0 -= margin, x1 += margin, y0 -= margin, y1 += margin;
  auto X = [&](double x) { return fmt((x - x0) * px); };
  auto Y = [&](double y) { return fmt((y1 - y) * px); };
  auto polyline = [&](const Trajectory& t, const char* color, double width) {
    std::string pts = X(0) + "," + Y(0);
    for (const auto& p : t.waypoints) pts += " " + X(p.x) + "," + Y(p.y);
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"" + fmt(width) +
           "\" points=\"" + pts + "\"/>\n";
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt((x1 - x0) * px) << "\" height=\""
      << fmt((y1 - y0) * px) << "\">\n";
  svg << "<polygon fill=\"#eeeeee\" stroke=\"#999999\" points=\"";
  for (const auto& p : scene.scene.corridor) svg << X(p.x) << "," << Y(p.y) << " ";
  svg << "\"/>\n";
  for (const auto& o : scene.scene.obstacles) {
    svg << "<circle fill=\"#cc4444\" cx=\"" << X(o.center.x) << "\" cy=\"" << Y(o.center.y) << "\" r=\""
        << fmt(o.radius * px) << "\"/>\n";
  }
  for (const auto& e : scene.experts) svg << polyline(e, "#228822", 3.0);
  for (const auto& p : record.proposals) svg << polyline(p, "#4466cc", 1.0);
  if (record.final) svg << polyline(*record.final, "#000000", 2.0);
  svg << "</svg>\n";
  write_text_atomic(path, svg.str());
}

void cmd_gen_data(const Config& cfg, const std::string& out_path) {
  const auto data = synthworld::generate_dataset(cfg.world, cfg.seed);
  synthworld::save_dataset(out_path, data);
  write_config(out_path + ".config.json", cfg);
}

void cmd_fit_gmn(const std::string& dataset_path, std::size_t k, std::uint64_t seed, const std::string& out_path) {
  const auto data = synthworld::load_dataset(dataset_path);
  const auto gmn = gmnprior::gmn_from_dataset(data, k, seed);
  write_text_atomic(out_path, gmnprior::to_json(gmn).dump(2) + "\n");
}

std::vector<meanflow::EpochMetrics> cmd_train(const Config& cfg, const std::string& dataset_path,
                                              const std::string& out_checkpoint, bool baseline_fm,
                                              const std::string& gmn_path) {
  const auto data = synthworld::load_dataset(dataset_path);
  if (data.empty()) throw std::runtime_error("dataset '" + dataset_path + "' is empty");
  gmnprior::GaussianMixtureNoise gmn;
  if (!gmn_path.empty()) {
    std::ifstream in(gmn_path);
    if (!in) throw std::runtime_error("cannot read mixture '" + gmn_path + "'");
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("mixture '" + gmn_path + "' is not valid JSON");
    gmn = gmnprior::gmn_from_json(j);
  } else {
    gmn = gmnprior::gmn_from_dataset(data, cfg.model.components, cfg.seed);
  }
  if (cfg.prior == PriorKind::gaussian) gmn = gmnprior::standard_gaussian(cfg.model.dim(), gmn.norm, gmn.k());

  const ModelKind kind = baseline_fm ? ModelKind::flow_matching : ModelKind::meanflow;
  auto model = meanflow::PlannerModel::create(kind, cfg.model, std::move(gmn), cfg.seed);
  meanflow::Trainer trainer(model, data, cfg.train, mix_seed(cfg.seed, 1),
                            baseline_fm ? flowbase::fm_objective() : meanflow::meanflow_objective());
  std::string curve = "epoch\tflow\ttau\ttotal\n";
  const auto history = trainer.fit([&](const meanflow::EpochMetrics& m) {
    curve += std::to_string(m.epoch) + "\t" + fmt(m.flow) + "\t" + fmt(m.tau) + "\t" + fmt(m.total) + "\n";
    std::fprintf(stderr, "epoch %zu/%zu  flow %.5f  tau %.5f  total %.5f\n", m.epoch, cfg.train.epochs, m.flow,
                 m.tau, m.total);
  });
  save_checkpoint(out_checkpoint, model, cfg);
  write_text_atomic(out_checkpoint + ".loss.tsv", curve);
  write_config(out_checkpoint + ".config.json", cfg);
  return history;
}

std::vector<SampleRecord> cmd_sample(const std::string& checkpoint_path, const std::string& dataset_path,
                                     const SampleOptions& opt, const std::string& out_path) {
  const auto ck = load_checkpoint(checkpoint_path);
  const auto data = synthworld::load_dataset(dataset_path);
  auto records = sample_scenes(ck, data, opt);
  save_samples(out_path, records);
  json resolved = to_json(ck.config);
  resolved["sample"] = {{"checkpoint", checkpoint_path},
                        {"seed", opt.seed},
                        {"n_scenes", opt.n_scenes},
                        {"solver", opt.solver ? json(flowbase::to_string(*opt.solver)) : json(nullptr)},
                        {"steps", opt.steps ? json(*opt.steps) : json(nullptr)},
                        {"no_arm", opt.no_arm},
                        {"component", opt.component ? json(*opt.component) : json(nullptr)}};
  write_text_atomic(out_path + ".config.json", resolved.dump(2) + "\n");
  return records;
}

EvalSummary cmd_eval(const std::string& samples_path, const std::string& dataset_path, const std::string& out_path,
                     const Config& cfg) {
  const auto records = load_samples(samples_path);
  const auto data = synthworld::load_dataset(dataset_path);
  std::vector<SceneMetrics> rows;
  const auto sum = evaluate(records, data, cfg.eval, &rows);

  std::string tsv = "scenario_id\tproposals\tscored_on\tnc\tdac\tep\tscore\td\trecall_0.2\trecall_0.5\tmin_l2\t"
                    "all_off_road\n";
  for (const auto& m : rows) {
    tsv += m.scenario_id + "\t" + std::to_string(m.proposals) + "\t" + (m.scored_final ? "final" : "proposal_mean") +
           "\t" + std::to_string(m.score.nc) + "\t" + std::to_string(m.score.dac) + "\t" + fmt(m.score.ep) + "\t" +
           fmt(m.score.score) + "\t" + (m.d ? fmt(*m.d) : "-") + "\t" + fmt(m.recall_02) + "\t" +
           fmt(m.recall_05) + "\t" + fmt(m.min_l2) + "\t" + (m.all_off_road ? "1" : "0") + "\n";
  }
  write_text_atomic(out_path + ".tsv", tsv);
  write_text_atomic(out_path + ".summary.json", to_json(sum).dump(2) + "\n");
  write_config(out_path + ".config.json", cfg);
  return sum;
}

std::vector<flowbase::BenchRow> cmd_bench(const std::string& meanflow_checkpoint, const std::string& fm_checkpoint,
                                          const std::string& dataset_path, const std::string& out_path,
                                          std::size_t n_scenes, std::size_t reps, std::uint64_t seed) {
  const auto mf = load_checkpoint(meanflow_checkpoint);
  const auto fm = load_checkpoint(fm_checkpoint);
  if (mf.model.kind != ModelKind::meanflow) throw ArgumentError("'" + meanflow_checkpoint + "' is not a mean-flow checkpoint");
  if (fm.model.kind != ModelKind::flow_matching) throw ArgumentError("'" + fm_checkpoint + "' is not a flow-matching checkpoint");
  auto data = synthworld::load_dataset(dataset_path);
  if (n_scenes > 0 && n_scenes < data.size()) data.resize(n_scenes);
  const auto rows = flowbase::compare_nfe(mf.model, fm.model, data, std::max<std::size_t>(reps, 5), seed);
  std::string tsv = "method\tnfe\tmedian_seconds_per_scene\tenergy_distance\n";
  for (const auto& r : rows) {
    tsv += r.method + "\t" + std::to_string(r.nfe) + "\t" + fmt(r.median_seconds) + "\t" + fmt(r.energy_distance) + "\n";
  }
  write_text_atomic(out_path, tsv);
  return rows;
}

}  // namespace mfplan::cli
