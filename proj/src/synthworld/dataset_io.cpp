#include "mfplan/core/error.hpp"
#include "mfplan/synthworld/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mfplan::synthworld {

using nlohmann::json;

namespace {

json point(Vec2 p) { return json::array({p.x, p.y}); }

[[noreturn]] void fail(std::size_t line_no, const std::string& field, const std::string& what) {
  throw DatasetFormatError("line " + std::to_string(line_no) + ": field '" + field + "': " + what);
}

const json& member(const json& j, const char* key, std::size_t line_no, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(line_no, path + key, "missing");
  return j.at(key);
}

double number(const json& j, std::size_t line_no, const std::string& field) {
  if (!j.is_number()) fail(line_no, field, "expected a number");
  return j.get<double>();
}

Vec2 read_point(const json& j, std::size_t line_no, const std::string& field) {
  if (!j.is_array() || j.size() != 2) fail(line_no, field, "expected [x, y]");
  return {number(j[0], line_no, field), number(j[1], line_no, field)};
}

}  // namespace

std::string to_json_line(const Scenario& s) {
  json obstacles = json::array();
  for (const auto& o : s.scene.obstacles) obstacles.push_back(json::array({o.center.x, o.center.y, o.radius}));
  json corridor = json::array();
  for (const auto& p : s.scene.corridor) corridor.push_back(point(p));
  json experts = json::array();
  for (const auto& e : s.experts) {
    json wps = json::array();
    for (const auto& p : e.waypoints) wps.push_back(point(p));
    experts.push_back(std::move(wps));
  }
  json rec = {{"scenario_id", s.scenario_id},
              {"scene",
               {{"ego_speed", s.scene.ego_speed},
                {"ego_accel", s.scene.ego_accel},
                {"command", to_string(s.scene.command)},
                {"obstacles", std::move(obstacles)},
                {"corridor", std::move(corridor)}}},
              {"experts", std::move(experts)}};
  return rec.dump();
}

Scenario from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, "<record>", std::string("malformed JSON (") + e.what() + ")");
  }
  Scenario s;
  const auto& id = member(j, "scenario_id", line_no, "");
  if (!id.is_string()) fail(line_no, "scenario_id", "expected a string");
  s.scenario_id = id.get<std::string>();
  const auto& scene = member(j, "scene", line_no, "");
  s.scene.ego_speed = number(member(scene, "ego_speed", line_no, "scene."), line_no, "scene.ego_speed");
  s.scene.ego_accel = number(member(scene, "ego_accel", line_no, "scene."), line_no, "scene.ego_accel");
  const auto& cmd = member(scene, "command", line_no, "scene.");
  try {
    s.scene.command = parse_command(cmd.is_string() ? cmd.get<std::string>() : std::string("<non-string>"));
  } catch (const ArgumentError& e) {
    fail(line_no, "scene.command", e.what());
  }
  const auto& obstacles = member(scene, "obstacles", line_no, "scene.");
  if (!obstacles.is_array()) fail(line_no, "scene.obstacles", "expected an array");
  for (const auto& o : obstacles) {
    if (!o.is_array() || o.size() != 3) fail(line_no, "scene.obstacles", "expected [x, y, r]");
    s.scene.obstacles.push_back({{number(o[0], line_no, "scene.obstacles"), number(o[1], line_no, "scene.obstacles")},
                                 number(o[2], line_no, "scene.obstacles")});
  }
  const auto& corridor = member(scene, "corridor", line_no, "scene.");
  if (!corridor.is_array()) fail(line_no, "scene.corridor", "expected an array");
  for (const auto& p : corridor) s.scene.corridor.push_back(read_point(p, line_no, "scene.corridor"));
  const auto& experts = member(j, "experts", line_no, "");
  if (!experts.is_array() || experts.empty()) fail(line_no, "experts", "expected a non-empty array");
  for (const auto& e : experts) {
    if (!e.is_array()) fail(line_no, "experts", "expected an array of waypoints");
    Trajectory tr;
    for (const auto& p : e) tr.waypoints.push_back(read_point(p, line_no, "experts"));
    s.experts.push_back(std::move(tr));
  }
  return s;
}

void save_dataset(const std::string& path, const std::vector<Scenario>& scenarios) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset to '" + path + "'");
    for (const auto& s : scenarios) out << to_json_line(s) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Scenario> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read dataset '" + path + "'");
  std::vector<Scenario> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (in.eof()) fail(line_no, "<record>", "truncated record (missing end of line)");
    out.push_back(from_json_line(line, line_no));
  }
  return out;
}

}  // namespace mfplan::synthworld
