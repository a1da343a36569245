#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfplan/arm/arm.hpp"
#include "mfplan/meanflow/decoder.hpp"

namespace mfplan::meanflow {

using diffkit::Tensor;
using gmnprior::Vector;
using synthworld::SceneContext;
using synthworld::Trajectory;

enum class ModelKind { meanflow, flow_matching };
const char* to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// Everything a checkpoint holds: parameters of the context encoder, the
/// velocity decoder and (for mean-flow models) the ARM, plus the prior.
struct PlannerModel {
  ModelKind kind = ModelKind::meanflow;
  ModelConfig cfg;
  diffkit::ParamStore params;
  synthworld::ContextEncoder encoder;
  DecoderNet decoder;
  std::optional<arm::ArmNet> arm;
  gmnprior::GaussianMixtureNoise gmn;

  static PlannerModel create(ModelKind kind, const ModelConfig& cfg, gmnprior::GaussianMixtureNoise gmn,
                             std::uint64_t seed);

  /// Flow-side parameter names (encoder and decoder); the rest belong to the ARM.
  bool is_flow_param(const std::string& name) const { return name.rfind("arm.", 0) != 0; }

  /// Decoder output u or v for noise [B, Nq, dim] at times r, t (one pair per
  /// scene) without recording.
  Tensor evaluate(const std::vector<const SceneContext*>& scenes, const Tensor& z, double r, double t) const;
};

struct Proposal {
  std::size_t component = 0;
  Vector noise;
  Vector normalized;
  Trajectory trajectory;
};

/// Noise draws for one scene: one per component, or `count` draws from the
/// single component `only`.
std::vector<std::pair<std::size_t, Vector>> draw_noise(const gmnprior::GaussianMixtureNoise& gmn, std::uint64_t seed,
                                                       std::optional<std::size_t> only = std::nullopt,
                                                       std::size_t count = 0);

/// x1 = x0 - u(x0, 0, 1) for every draw; one proposal per draw, tagged with
/// its component.
std::vector<Proposal> one_step_sample(const PlannerModel& model, const SceneContext& scene, std::uint64_t seed,
                                      std::optional<std::size_t> only = std::nullopt);
/// Batched form used by training and benchmarks: noise [B, Nq, dim] -> x1.
Tensor one_step(const PlannerModel& model, const std::vector<const SceneContext*>& scenes, const Tensor& noise);

}  // namespace mfplan::meanflow
