#include "mfplan/core/error.hpp"
#include "mfplan/synthworld/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mfplan/core/rng.hpp"

namespace mfplan::synthworld {

const char* to_string(Command c) {
  switch (c) {
    case Command::straight: return "straight";
    case Command::left: return "left";
    case Command::right: return "right";
  }
  return "?";
}

Command parse_command(const std::string& s) {
  if (s == "straight") return Command::straight;
  if (s == "left") return Command::left;
  if (s == "right") return Command::right;
  throw ArgumentError("unknown command '" + s + "'");
}

const char* to_string(Family f) {
  switch (f) {
    case Family::fork: return "fork";
    case Family::lane_change: return "lane_change";
    case Family::obstacle_slalom: return "obstacle_slalom";
    case Family::stop_go: return "stop_go";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  for (std::size_t i = 0; i < kFamilies; ++i) {
    const auto f = static_cast<Family>(i);
    if (s == to_string(f)) return f;
  }
  throw ArgumentError("unknown scenario family '" + s + "'");
}

Family family_of(const Scenario& s) {
  const auto dash = s.scenario_id.rfind('-');
  return parse_family(s.scenario_id.substr(0, dash));
}

namespace {

struct Longitudinal {
  double v0;
  double a;
  double at(double t) const {
    if (a < 0.0 && t > v0 / -a) return v0 * v0 / (-2.0 * a);
    return v0 * t + 0.5 * a * t * t;
  }
};

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Polygon rectangle(double x0, double x1, double y0, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

template <class Lateral>
Trajectory build(const WorldConfig& cfg, const Longitudinal& lon, Lateral lateral) {
  Trajectory tr;
  for (std::size_t i = 1; i <= cfg.horizon; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    tr.waypoints.push_back({lon.at(t), lateral(t)});
  }
  return tr;
}

// Distractor obstacles placed past the end of every expert.
void add_distractors(SceneContext& scene, const WorldConfig& cfg, Rng& rng, double x_from, double half_span,
                     std::size_t count) {
  for (std::size_t i = 0; i < count && scene.obstacles.size() < cfg.max_obstacles; ++i) {
    const double x = rng.uniform(x_from, x_from + 20.0);
    const double y = rng.uniform(-half_span, half_span);
    scene.obstacles.push_back({{x, y}, rng.uniform(0.5, 1.2)});
  }
}

double corridor_back(const WorldConfig& cfg) { return -cfg.half_length - 3.0; }

Scenario make_fork(const WorldConfig& cfg, Rng& rng) {
  Scenario s;
  const double horizon_t = static_cast<double>(cfg.horizon) * cfg.dt;
  const Longitudinal lon{rng.uniform(std::max(cfg.speed_min, 5.0), cfg.speed_max), rng.uniform(-0.5, 1.0)};
  const double total = lon.at(horizon_t);
  const double r = rng.uniform(0.8, 1.4);
  const double x_obs = rng.uniform(0.45, 0.65) * total + cfg.half_length;
  const double offset = r + 1.9;
  const double half_span = offset + cfg.half_width + 1.2;

  // The swerve completes before the front of the box reaches the obstacle.
  const double t0 = 0.2;
  double t1 = horizon_t;
  for (double t = t0; t <= horizon_t; t += 0.01) {
    if (lon.at(t) + cfg.half_length + 1.0 >= x_obs - r) {
      t1 = t;
      break;
    }
  }
  auto side = [&](double sign) {
    return build(cfg, lon, [=](double t) { return sign * offset * smoothstep((t - t0) / (t1 - t0)); });
  };
  s.scene.ego_speed = lon.v0;
  s.scene.ego_accel = lon.a;
  s.scene.command = rng.bernoulli(0.5) ? Command::left : Command::right;
  s.scene.obstacles.push_back({{x_obs, 0.0}, r});
  add_distractors(s.scene, cfg, rng, total + cfg.half_length + 3.0, half_span, rng.index(cfg.max_obstacles));
  s.scene.corridor = rectangle(corridor_back(cfg), total + cfg.half_length + 6.0, -half_span, half_span);
  const bool left_first = s.scene.command == Command::left;
  s.experts = {side(left_first ? 1.0 : -1.0), side(left_first ? -1.0 : 1.0)};
  return s;
}

Scenario make_lane_change(const WorldConfig& cfg, Rng& rng) {
  Scenario s;
  const double horizon_t = static_cast<double>(cfg.horizon) * cfg.dt;
  const Longitudinal lon{rng.uniform(std::max(cfg.speed_min, 5.0), cfg.speed_max), rng.uniform(-0.5, 1.0)};
  const double total = lon.at(horizon_t);
  const double lane = 3.5;
  const double t0 = 0.5, t1 = 3.0;
  s.scene.ego_speed = lon.v0;
  s.scene.ego_accel = lon.a;
  s.scene.command = rng.bernoulli(0.5) ? Command::left : Command::straight;
  add_distractors(s.scene, cfg, rng, total + cfg.half_length + 3.0, lane, rng.index(cfg.max_obstacles + 1));
  s.scene.corridor = rectangle(corridor_back(cfg), total + cfg.half_length + 6.0, -0.5 * lane - cfg.half_width,
                               1.5 * lane + cfg.half_width);
  const auto keep = build(cfg, lon, [](double) { return 0.0; });
  const auto change = build(cfg, lon, [=](double t) { return lane * smoothstep((t - t0) / (t1 - t0)); });
  if (s.scene.command == Command::left) {
    s.experts = {change, keep};
  } else {
    s.experts = {keep, change};
  }
  return s;
}

Scenario make_slalom(const WorldConfig& cfg, Rng& rng) {
  Scenario s;
  const double horizon_t = static_cast<double>(cfg.horizon) * cfg.dt;
  const Longitudinal lon{rng.uniform(std::max(cfg.speed_min, 5.0), cfg.speed_max), rng.uniform(-0.5, 1.0)};
  const double total = lon.at(horizon_t);
  const double amp = rng.uniform(1.4, 2.0);
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const double half_span = amp + cfg.half_width + 2.0;
  auto lateral = [=](double t) { return sign * amp * std::sin(2.0 * std::numbers::pi * t / horizon_t); };
  s.scene.ego_speed = lon.v0;
  s.scene.ego_accel = lon.a;
  s.scene.command = Command::straight;
  const double gap = 0.65 * amp;
  s.scene.obstacles.push_back({{lon.at(0.25 * horizon_t), -sign * gap}, rng.uniform(0.4, 0.8)});
  s.scene.obstacles.push_back({{lon.at(0.75 * horizon_t), sign * gap}, rng.uniform(0.4, 0.8)});
  add_distractors(s.scene, cfg, rng, total + cfg.half_length + 3.0, half_span, rng.index(cfg.max_obstacles - 1));
  s.scene.corridor = rectangle(corridor_back(cfg), total + cfg.half_length + 6.0, -half_span, half_span);
  s.experts = {build(cfg, lon, lateral)};
  return s;
}

Scenario make_stop_go(const WorldConfig& cfg, Rng& rng) {
  Scenario s;
  const double horizon_t = static_cast<double>(cfg.horizon) * cfg.dt;
  const double half_span = rng.uniform(2.5, 4.0);
  const bool stop = rng.bernoulli(0.5);
  Longitudinal lon{rng.uniform(cfg.speed_min, cfg.speed_max), 0.0};
  if (stop) {
    lon.a = -rng.uniform(1.5, 3.5);
    const double r = rng.uniform(0.6, 1.2);
    const double x_obs = lon.at(horizon_t) + cfg.half_length + rng.uniform(1.5, 3.0) + r;
    s.scene.obstacles.push_back({{x_obs, rng.uniform(-0.5, 0.5)}, r});
  } else {
    lon.a = rng.uniform(0.5, 2.0);
  }
  const double total = lon.at(horizon_t);
  s.scene.ego_speed = lon.v0;
  s.scene.ego_accel = lon.a;
  s.scene.command = Command::straight;
  const double far = stop ? s.scene.obstacles.front().center.x + 3.0 : total + cfg.half_length + 3.0;
  add_distractors(s.scene, cfg, rng, far, half_span, rng.index(cfg.max_obstacles));
  s.scene.corridor = rectangle(corridor_back(cfg), std::max(total, far) + cfg.half_length + 6.0, -half_span,
                               half_span);
  s.experts = {build(cfg, lon, [](double) { return 0.0; })};
  return s;
}

void check_config(const WorldConfig& cfg) {
  if (cfg.n_scenarios == 0) throw GenerationError("n_scenarios must be positive");
  double total = 0.0;
  for (double w : cfg.family_mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw GenerationError("family_mix weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw GenerationError("family_mix weights are all zero");
  if (cfg.horizon == 0 || !(cfg.dt > 0.0)) throw GenerationError("horizon and dt must be positive");
  if (cfg.max_obstacles < 2) throw GenerationError("max_obstacles must be at least 2");
  if (!(cfg.speed_min > 0.0) || cfg.speed_max < cfg.speed_min) throw GenerationError("invalid speed range");
}

Family pick_family(const WorldConfig& cfg, Rng& rng) {
  double total = 0.0;
  for (double w : cfg.family_mix) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < kFamilies; ++i) {
    if (cfg.family_mix[i] <= 0.0) continue;
    if (u < cfg.family_mix[i]) return static_cast<Family>(i);
    u -= cfg.family_mix[i];
  }
  for (std::size_t i = kFamilies; i-- > 0;) {
    if (cfg.family_mix[i] > 0.0) return static_cast<Family>(i);
  }
  return Family::fork;
}

}  // namespace

std::string validate(const Scenario& s, const WorldConfig& cfg) {
  const auto& corridor = s.scene.corridor;
  if (!geom::is_convex(corridor) || geom::signed_area(corridor) <= 0) return "corridor is not a convex CCW polygon";
  if (!geom::contains(corridor, {0.0, 0.0})) return "corridor does not contain the origin";
  if (s.experts.empty()) return "no expert trajectories";
  for (const auto& o : s.scene.obstacles) {
    if (!(o.radius > 0.0)) return "obstacle radius must be positive";
  }
  for (std::size_t e = 0; e < s.experts.size(); ++e) {
    const auto& wp = s.experts[e].waypoints;
    const std::string tag = "expert " + std::to_string(e);
    if (wp.size() != cfg.horizon) return tag + " has " + std::to_string(wp.size()) + " waypoints";
    const auto heading = geom::headings(wp);
    Vec2 prev{};
    for (std::size_t i = 0; i < wp.size(); ++i) {
      if (!std::isfinite(wp[i].x) || !std::isfinite(wp[i].y)) return tag + " has a non-finite waypoint";
      if (geom::norm(wp[i] - prev) > cfg.v_max * cfg.dt + 1e-9) return tag + " exceeds the speed cap";
      prev = wp[i];
      const auto box = geom::oriented_box(wp[i], heading[i], cfg.half_length, cfg.half_width);
      for (const auto& v : box) {
        if (!geom::contains(corridor, v)) return tag + " leaves the corridor at step " + std::to_string(i);
      }
      for (const auto& o : s.scene.obstacles) {
        if (geom::disc_intersects(box, o.center, o.radius)) {
          return tag + " collides with an obstacle at step " + std::to_string(i);
        }
      }
    }
  }
  return {};
}

std::vector<Scenario> generate_dataset(const WorldConfig& cfg, std::uint64_t seed, GenerationStats* stats) {
  check_config(cfg);
  std::vector<Scenario> out;
  out.reserve(cfg.n_scenarios);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < cfg.n_scenarios; ++i) {
    Rng rng(mix_seed(seed, i));
    const Family family = pick_family(cfg, rng);
    bool ok = false;
    for (std::size_t attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
      Scenario s;
      switch (family) {
        case Family::fork: s = make_fork(cfg, rng); break;
        case Family::lane_change: s = make_lane_change(cfg, rng); break;
        case Family::obstacle_slalom: s = make_slalom(cfg, rng); break;
        case Family::stop_go: s = make_stop_go(cfg, rng); break;
      }
      if (!validate(s, cfg).empty()) continue;
      char id[48];
      std::snprintf(id, sizeof id, "%s-%06zu", to_string(family), i);
      s.scenario_id = id;
      out.push_back(std::move(s));
      ok = true;
    }
    if (!ok) ++skipped;
  }
  if (stats) stats->skipped = skipped;
  if (skipped > 0) std::fprintf(stderr, "generate_dataset: skipped %zu infeasible scenarios\n", skipped);
  return out;
}

}  // namespace mfplan::synthworld
