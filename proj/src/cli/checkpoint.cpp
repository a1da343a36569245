#include "mfplan/cli/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace mfplan::cli {

using nlohmann::json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_checkpoint(const meanflow::PlannerModel& model, const Config& config) {
  json params = json::array();
  std::size_t offset = 0;
  for (const auto& slot : model.params.slots()) {
    params.push_back({{"name", slot.name}, {"offset", offset}, {"shape", slot.value.shape()}});
    offset += slot.value.size();
  }
  const json manifest{{"format_version", kCheckpointVersion},
                      {"kind", meanflow::to_string(model.kind)},
                      {"config", to_json(config)},
                      {"params", params},
                      {"gmn", gmnprior::to_json(model.gmn)}};
  const std::string text = manifest.dump();

  std::string out;
  out.reserve(8 + text.size() + 8 * offset);
  put_u64(out, text.size());
  out += text;
  for (const auto& slot : model.params.slots()) {
    for (double x : slot.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8) throw CheckpointError("checkpoint is truncated");
  const std::uint64_t len = get_u64(bytes, 0);
  if (len > bytes.size() - 8) throw CheckpointError("checkpoint manifest is truncated");
  const json manifest = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len), nullptr,
                                    false);
  if (manifest.is_discarded() || !manifest.is_object()) throw CheckpointError("checkpoint manifest is not JSON");
  const int version = manifest.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }

  Checkpoint ck;
  meanflow::ModelKind kind;
  try {
    kind = meanflow::parse_model_kind(manifest.at("kind").get<std::string>());
    ck.config = config_from_json(manifest.at("config"));
    ck.model = meanflow::PlannerModel::create(kind, ck.config.model, gmnprior::gmn_from_json(manifest.at("gmn")), 0);
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest is invalid: ") + e.what());
  }

  const auto& index = manifest.at("params");
  auto& slots = ck.model.params.slots();
  if (!index.is_array() || index.size() != slots.size()) {
    throw CheckpointError("checkpoint parameter index does not match the model architecture");
  }
  const std::size_t blob_at = 8 + len;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    const auto& entry = index[i];
    if (entry.value("name", std::string()) != slot.name || entry.value("offset", std::size_t{0}) != expected ||
        entry.at("shape").get<diffkit::Shape>() != slot.value.shape()) {
      throw CheckpointError("checkpoint parameter '" + slot.name + "' does not match the model architecture");
    }
    expected += slot.value.size();
  }
  if (bytes.size() != blob_at + 8 * expected) throw CheckpointError("checkpoint blob has the wrong size");
  std::size_t at = blob_at;
  for (auto& slot : slots) {
    for (double& x : slot.value.data()) {
      x = std::bit_cast<double>(get_u64(bytes, at));
      at += 8;
    }
    slot.value.require_finite(slot.name.c_str());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const meanflow::PlannerModel& model, const Config& config) {
  write_text_atomic(path, encode_checkpoint(model, config));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mfplan::cli
