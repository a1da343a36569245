#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfplan/cli/checkpoint.hpp"
#include "mfplan/flowbase/flow_matching.hpp"

namespace mfplan::cli {

using synthworld::Scenario;
using synthworld::Trajectory;

struct SampleOptions {
  std::uint64_t seed = 0;
  /// 0 samples every scene.
  std::size_t n_scenes = 0;
  std::optional<flowbase::Method> solver;
  std::optional<std::size_t> steps;
  bool no_arm = false;
  std::optional<std::size_t> component;
};

struct SampleRecord {
  std::string scenario_id;
  std::vector<std::size_t> components;
  std::vector<Trajectory> proposals;
  std::optional<Trajectory> final;
  std::string method;
};

std::string to_json_line(const SampleRecord& r);
SampleRecord sample_from_json_line(const std::string& line, std::size_t line_no);
void save_samples(const std::string& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> load_samples(const std::string& path);

/// Scene i draws its noise from mix_seed(seed, i). A solver is only valid for
/// flow-matching checkpoints (default Euler, 5 steps), which never fuse.
std::vector<SampleRecord> sample_scenes(const Checkpoint& ck, const std::vector<Scenario>& scenes,
                                        const SampleOptions& opt);

struct SceneMetrics {
  std::string scenario_id;
  std::size_t proposals = 0;
  bool scored_final = true;
  evalkit::ScoreBreakdown score;
  std::optional<double> d;
  double recall_02 = 0.0;
  double recall_05 = 0.0;
  double recall = 0.0;
  double min_l2 = 0.0;
  bool all_off_road = false;
};

struct EvalSummary {
  std::size_t scenes = 0;
  /// "final", "proposal_mean" or "mixed": what the score was computed on.
  std::string score_source;
  double score = 0.0;
  double d = 0.0;
  std::size_t d_scenes = 0;
  double m_dp = 0.0;
  double recall_02 = 0.0;
  double recall_05 = 0.0;
  double recall = 0.0;
  std::size_t all_off_road = 0;
};

/// Records are matched to scenarios by id. Scenes without a final trajectory
/// are scored on the mean of their proposals; D is averaged over scenes with
/// at least two proposals.
EvalSummary evaluate(const std::vector<SampleRecord>& records, const std::vector<Scenario>& scenes,
                     const EvalConfig& cfg, std::vector<SceneMetrics>* per_scene = nullptr);
nlohmann::json to_json(const EvalSummary& s);

/// Proposals are the expert modes; the first expert is the final trajectory.
std::vector<SampleRecord> expert_records(const std::vector<Scenario>& scenes);

void write_svg(const std::string& path, const Scenario& scene, const SampleRecord& record);

// Subcommands. Each writes its outputs atomically.
void cmd_gen_data(const Config& cfg, const std::string& out_path);
void cmd_fit_gmn(const std::string& dataset_path, std::size_t k, std::uint64_t seed, const std::string& out_path);
/// Writes the checkpoint, <checkpoint>.loss.tsv and <checkpoint>.config.json.
std::vector<meanflow::EpochMetrics> cmd_train(const Config& cfg, const std::string& dataset_path,
                                              const std::string& out_checkpoint, bool baseline_fm,
                                              const std::string& gmn_path = "");
/// An FM checkpoint never fuses, so --no-arm is implied for it.
std::vector<SampleRecord> cmd_sample(const std::string& checkpoint_path, const std::string& dataset_path,
                                     const SampleOptions& opt, const std::string& out_path);
/// Writes <out>.tsv (one row per scene), <out>.summary.json and <out>.config.json.
EvalSummary cmd_eval(const std::string& samples_path, const std::string& dataset_path, const std::string& out_path,
                     const Config& cfg);
std::vector<flowbase::BenchRow> cmd_bench(const std::string& meanflow_checkpoint, const std::string& fm_checkpoint,
                                          const std::string& dataset_path, const std::string& out_path,
                                          std::size_t n_scenes, std::size_t reps, std::uint64_t seed);

}  // namespace mfplan::cli
