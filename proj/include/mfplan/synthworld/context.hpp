#pragma once

#include <vector>

#include "mfplan/diffkit/layers.hpp"
#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::synthworld {

inline constexpr std::size_t kEgoFeatures = 5;       // speed, accel, one-hot command
inline constexpr std::size_t kObstacleFeatures = 4;  // x, y, radius, valid
inline constexpr std::size_t kCorridorFeatures = 4;  // centroid x/y, width, length

struct SceneFeatures {
  std::vector<double> ego;
  std::vector<double> obstacles;  // max_obstacles rows of kObstacleFeatures
  std::vector<double> corridor;
};

/// Scaled raw features; obstacle slots beyond the scene's obstacles are zero
/// with the valid flag cleared.
SceneFeatures scene_features(const SceneContext& scene, std::size_t max_obstacles);

/// Learned affine per token type: one ego token, `max_obstacles` obstacle
/// tokens and one corridor token, each of model width.
struct ContextEncoder {
  std::size_t width = 0;
  std::size_t max_obstacles = 0;
  diffkit::Linear ego;
  diffkit::Linear obstacle;
  diffkit::Linear corridor;

  static ContextEncoder create(diffkit::ParamStore& ps, const std::string& name, std::size_t width,
                               std::size_t max_obstacles, Rng& rng);
  std::size_t tokens() const { return max_obstacles + 2; }
  /// [B, tokens(), width]
  diffkit::Var operator()(diffkit::Graph& g, const std::vector<const SceneContext*>& scenes) const;
};

}  // namespace mfplan::synthworld
