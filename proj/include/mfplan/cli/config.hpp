#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfplan/evalkit/metrics.hpp"
#include "mfplan/meanflow/trainer.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PriorKind { gmn, gaussian };

struct EvalConfig {
  double radius = 0.5;
  double ego_length = 4.0;
  double ego_width = 1.8;
  std::size_t grid_resolution = 400;

  evalkit::EgoBox box() const { return {ego_length / 2.0, ego_width / 2.0}; }
};

struct Config {
  std::uint64_t seed = 0;
  synthworld::WorldConfig world;
  meanflow::ModelConfig model;
  PriorKind prior = PriorKind::gmn;
  meanflow::TrainConfig train;
  EvalConfig eval;
};

nlohmann::json to_json(const Config& c);
/// Unknown keys and ill-typed values are errors; missing keys keep defaults.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

/// "train.epochs=200": the value is read as JSON, or as a string if it does
/// not parse.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Defaults, then the file (if any), then overrides, then MFPLAN_SEED.
Config resolve_config(const std::string& path, const std::vector<std::string>& overrides);

void write_text_atomic(const std::string& path, const std::string& text);
void write_config(const std::string& path, const Config& c);

}  // namespace mfplan::cli
