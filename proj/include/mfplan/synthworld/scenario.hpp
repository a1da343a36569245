#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfplan/core/error.hpp"
#include "mfplan/geom/geometry.hpp"

namespace mfplan::synthworld {

using geom::Polygon;
using geom::Vec2;

enum class Command { straight, left, right };
enum class Family { fork, lane_change, obstacle_slalom, stop_go };
inline constexpr std::size_t kFamilies = 4;

const char* to_string(Command c);
Command parse_command(const std::string& s);
const char* to_string(Family f);
Family parse_family(const std::string& s);

struct Obstacle {
  Vec2 center;
  double radius = 1.0;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct SceneContext {
  double ego_speed = 0.0;
  double ego_accel = 0.0;
  Command command = Command::straight;
  std::vector<Obstacle> obstacles;
  Polygon corridor;
  friend bool operator==(const SceneContext&, const SceneContext&) = default;
};

/// Waypoints at t = dt, 2 dt, ..., T_f dt in the ego frame (the ego itself
/// sits at the origin at t = 0 and is not stored).
struct Trajectory {
  std::vector<Vec2> waypoints;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Scenario {
  std::string scenario_id;
  SceneContext scene;
  /// Feasible modes. Multi-mode families list the command-preferred mode first.
  std::vector<Trajectory> experts;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct WorldConfig {
  std::size_t n_scenarios = 1000;
  /// Weights over {fork, lane_change, obstacle_slalom, stop_go}.
  std::array<double, kFamilies> family_mix{0.4, 0.2, 0.2, 0.2};
  std::size_t horizon = 8;
  double dt = 0.5;
  std::size_t max_obstacles = 4;
  double speed_min = 3.0;
  double speed_max = 12.0;
  double v_max = 25.0;
  double half_length = 2.0;
  double half_width = 0.9;
  std::size_t max_retries = 32;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerationStats {
  std::size_t skipped = 0;
};

/// Deterministic in (config, seed). Scenarios whose geometry stays
/// infeasible after `max_retries` attempts are skipped and counted.
std::vector<Scenario> generate_dataset(const WorldConfig& cfg, std::uint64_t seed, GenerationStats* stats = nullptr);

/// Empty string when every expert stays inside the corridor, clear of all
/// obstacles and within the speed cap; otherwise a description of the first
/// violation.
std::string validate(const Scenario& s, const WorldConfig& cfg);

Family family_of(const Scenario& s);

}  // namespace mfplan::synthworld
