#include "mfplan/synthworld/context.hpp"

#include <algorithm>

namespace mfplan::synthworld {

using namespace diffkit;

SceneFeatures scene_features(const SceneContext& scene, std::size_t max_obstacles) {
  SceneFeatures f;
  f.ego = {scene.ego_speed / 10.0, scene.ego_accel / 2.0, scene.command == Command::straight ? 1.0 : 0.0,
           scene.command == Command::left ? 1.0 : 0.0, scene.command == Command::right ? 1.0 : 0.0};
  f.obstacles.assign(max_obstacles * kObstacleFeatures, 0.0);
  for (std::size_t i = 0; i < std::min(max_obstacles, scene.obstacles.size()); ++i) {
    const auto& o = scene.obstacles[i];
    double* row = f.obstacles.data() + i * kObstacleFeatures;
    row[0] = o.center.x / 20.0;
    row[1] = o.center.y / 5.0;
    row[2] = o.radius / 2.0;
    row[3] = 1.0;
  }
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (!scene.corridor.empty()) {
    x0 = x1 = scene.corridor.front().x;
    y0 = y1 = scene.corridor.front().y;
    for (const auto& p : scene.corridor) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  const Vec2 c = geom::centroid(scene.corridor);
  f.corridor = {c.x / 20.0, c.y / 5.0, (y1 - y0) / 5.0, (x1 - x0) / 20.0};
  return f;
}

ContextEncoder ContextEncoder::create(ParamStore& ps, const std::string& name, std::size_t width,
                                      std::size_t max_obstacles, Rng& rng) {
  ContextEncoder e;
  e.width = width;
  e.max_obstacles = max_obstacles;
  e.ego = Linear::create(ps, name + ".ego", kEgoFeatures, width, rng);
  e.obstacle = Linear::create(ps, name + ".obstacle", kObstacleFeatures, width, rng);
  e.corridor = Linear::create(ps, name + ".corridor", kCorridorFeatures, width, rng);
  return e;
}

Var ContextEncoder::operator()(Graph& g, const std::vector<const SceneContext*>& scenes) const {
  const std::size_t b = scenes.size();
  Tensor ego_in(Shape{b, 1, kEgoFeatures});
  Tensor obs_in(Shape{b, max_obstacles, kObstacleFeatures});
  Tensor cor_in(Shape{b, 1, kCorridorFeatures});
  for (std::size_t i = 0; i < b; ++i) {
    const auto f = scene_features(*scenes[i], max_obstacles);
    std::copy(f.ego.begin(), f.ego.end(), ego_in.data().begin() + i * kEgoFeatures);
    std::copy(f.obstacles.begin(), f.obstacles.end(), obs_in.data().begin() + i * f.obstacles.size());
    std::copy(f.corridor.begin(), f.corridor.end(), cor_in.data().begin() + i * kCorridorFeatures);
  }
  return concat({ego(g, g.constant(std::move(ego_in))), obstacle(g, g.constant(std::move(obs_in))),
                 corridor(g, g.constant(std::move(cor_in)))},
                1);
}

}  // namespace mfplan::synthworld
