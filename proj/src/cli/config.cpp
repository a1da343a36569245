#include "mfplan/core/error.hpp"
#include "mfplan/cli/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mfplan::cli {

using nlohmann::json;
using synthworld::Family;

namespace {

// Every key in `defaults` may be replaced; anything else is rejected so that
// typos do not silently fall back to defaults.
void merge(json& defaults, const json& user, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    json& slot = defaults[key];
    if (slot.is_object()) {
      merge(slot, value, path);
    } else {
      if (slot.is_number() != value.is_number() || slot.is_string() != value.is_string() ||
          slot.is_boolean() != value.is_boolean()) {
        throw ConfigError("config key '" + path + "' has the wrong type");
      }
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + section + "." + key + "' is invalid");
  }
}

}  // namespace

json to_json(const Config& c) {
  json mix = json::object();
  for (std::size_t f = 0; f < synthworld::kFamilies; ++f) {
    mix[synthworld::to_string(static_cast<Family>(f))] = c.world.family_mix[f];
  }
  const auto& w = c.world;
  const auto& m = c.model;
  const auto& t = c.train;
  return {{"seed", c.seed},
          {"dataset",
           {{"n_scenarios", w.n_scenarios},
            {"family_mix", mix},
            {"horizon", w.horizon},
            {"dt", w.dt},
            {"max_obstacles", w.max_obstacles},
            {"speed_min", w.speed_min},
            {"speed_max", w.speed_max},
            {"v_max", w.v_max},
            {"max_retries", w.max_retries}}},
          {"model",
           {{"width", m.width},
            {"depth", m.depth},
            {"heads", m.heads},
            {"ffn_hidden", m.ffn_hidden},
            {"components", m.components},
            {"max_frequency", m.max_frequency},
            {"zero_head", m.zero_head},
            {"prior", c.prior == PriorKind::gmn ? "gmn" : "gaussian"}}},
          {"train",
           {{"epochs", t.epochs},
            {"batch", t.batch},
            {"lr", t.lr},
            {"weight_decay", t.weight_decay},
            {"warmup_epochs", t.warmup_epochs},
            {"p_equal", t.p_equal},
            {"lambda_tau", t.lambda_tau},
            {"lambda_flow", t.lambda_flow},
            {"lambda_map", t.lambda_map},
            {"loss_variant", meanflow::to_string(t.loss_variant)},
            {"primary_expert_prob", t.primary_expert_prob}}},
          {"eval",
           {{"radius", c.eval.radius},
            {"ego_length", c.eval.ego_length},
            {"ego_width", c.eval.ego_width},
            {"grid_resolution", c.eval.grid_resolution}}}};
}

Config config_from_json(const json& user) {
  json j = to_json(Config{});
  merge(j, user, "");

  Config c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config key 'seed' must be a non-negative integer");
  }
  auto& w = c.world;
  w.n_scenarios = get<std::size_t>(j, "dataset", "n_scenarios");
  for (std::size_t f = 0; f < synthworld::kFamilies; ++f) {
    const char* name = synthworld::to_string(static_cast<Family>(f));
    w.family_mix[f] = j["dataset"]["family_mix"][name].get<double>();
  }
  w.horizon = get<std::size_t>(j, "dataset", "horizon");
  w.dt = get<double>(j, "dataset", "dt");
  w.max_obstacles = get<std::size_t>(j, "dataset", "max_obstacles");
  w.speed_min = get<double>(j, "dataset", "speed_min");
  w.speed_max = get<double>(j, "dataset", "speed_max");
  w.v_max = get<double>(j, "dataset", "v_max");
  w.max_retries = get<std::size_t>(j, "dataset", "max_retries");

  auto& m = c.model;
  m.width = get<std::size_t>(j, "model", "width");
  m.depth = get<std::size_t>(j, "model", "depth");
  m.heads = get<std::size_t>(j, "model", "heads");
  m.ffn_hidden = get<std::size_t>(j, "model", "ffn_hidden");
  m.components = get<std::size_t>(j, "model", "components");
  m.max_frequency = get<double>(j, "model", "max_frequency");
  m.zero_head = get<bool>(j, "model", "zero_head");
  m.horizon = w.horizon;
  m.max_obstacles = w.max_obstacles;
  const auto prior = get<std::string>(j, "model", "prior");
  if (prior == "gmn") {
    c.prior = PriorKind::gmn;
  } else if (prior == "gaussian") {
    c.prior = PriorKind::gaussian;
  } else {
    throw ConfigError("model.prior must be 'gmn' or 'gaussian', got '" + prior + "'");
  }
  if (m.width == 0 || m.heads == 0 || m.width % m.heads != 0) {
    throw ConfigError("model.width must be a positive multiple of model.heads");
  }
  if (m.components == 0) throw ConfigError("model.components must be positive");

  auto& t = c.train;
  t.epochs = get<std::size_t>(j, "train", "epochs");
  t.batch = get<std::size_t>(j, "train", "batch");
  t.lr = get<double>(j, "train", "lr");
  t.weight_decay = get<double>(j, "train", "weight_decay");
  t.warmup_epochs = get<std::size_t>(j, "train", "warmup_epochs");
  t.p_equal = get<double>(j, "train", "p_equal");
  t.lambda_tau = get<double>(j, "train", "lambda_tau");
  t.lambda_flow = get<double>(j, "train", "lambda_flow");
  t.lambda_map = get<double>(j, "train", "lambda_map");
  try {
    t.loss_variant = meanflow::parse_loss_variant(get<std::string>(j, "train", "loss_variant"));
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  t.primary_expert_prob = get<double>(j, "train", "primary_expert_prob");
  if (t.batch == 0) throw ConfigError("train.batch must be positive");
  if (t.p_equal < 0.0 || t.p_equal > 1.0) throw ConfigError("train.p_equal must lie in [0, 1]");

  c.eval.radius = get<double>(j, "eval", "radius");
  c.eval.ego_length = get<double>(j, "eval", "ego_length");
  c.eval.ego_width = get<double>(j, "eval", "ego_width");
  c.eval.grid_resolution = get<std::size_t>(j, "eval", "grid_resolution");
  if (c.eval.grid_resolution == 0) throw ConfigError("eval.grid_resolution must be positive");
  w.half_length = c.eval.ego_length / 2.0;
  w.half_width = c.eval.ego_width / 2.0;
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    node = &(*node)[path[i]];
    if (!node->is_object() && !node->is_null()) throw ConfigError("override '" + key + "' descends into a value");
  }
  (*node)[path.back()] = value;
}

Config resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  if (const char* env = std::getenv("MFPLAN_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ConfigError(std::string("MFPLAN_SEED is not an integer: '") + env + "'");
    j["seed"] = static_cast<std::uint64_t>(seed);
  }
  return config_from_json(j);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_config(const std::string& path, const Config& c) { write_text_atomic(path, to_json(c).dump(2) + "\n"); }

}  // namespace mfplan::cli
