#pragma once

#include <stdexcept>
#include <string>

#include "mfplan/cli/config.hpp"
#include "mfplan/meanflow/planner.hpp"

namespace mfplan::cli {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Config config;
  meanflow::PlannerModel model;
};

/// Container layout: manifest length (u64, little-endian), JSON manifest,
/// then every parameter as little-endian float64 in manifest order.
std::string encode_checkpoint(const meanflow::PlannerModel& model, const Config& config);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const meanflow::PlannerModel& model, const Config& config);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mfplan::cli
