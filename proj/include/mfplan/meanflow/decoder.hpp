#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfplan/diffkit/layers.hpp"

namespace mfplan::meanflow {

struct ModelConfig {
  std::size_t width = 128;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 256;
  std::size_t horizon = 8;
  std::size_t max_obstacles = 4;
  std::size_t components = 8;
  double max_frequency = 50.0;
  bool zero_head = true;

  std::size_t dim() const { return 2 * horizon; }
  std::size_t context_tokens() const { return max_obstacles + 2; }
};

/// Sinusoidal features of a scalar time followed by a learned projection to
/// one model-width token.
struct TimeEmbedding {
  std::size_t width = 0;
  double max_frequency = 50.0;
  diffkit::Linear proj;

  static TimeEmbedding create(diffkit::ParamStore& ps, const std::string& name, std::size_t width,
                              double max_frequency, Rng& rng);
  /// [B, 1] -> [B, 1, width]
  diffkit::Var operator()(diffkit::Graph& g, const diffkit::Var& time) const;
};

struct DecoderBlock {
  diffkit::LayerNorm ln_query;
  diffkit::LayerNorm ln_memory;
  diffkit::MultiHeadAttention attn;
  diffkit::LayerNorm ln_ffn;
  diffkit::FeedForward ffn;
};

/// Noise tokens query the scene context plus the time tokens; every query is
/// decoded independently, so a scene can carry any number of them.
struct DecoderNet {
  ModelConfig cfg;
  bool uses_r = true;
  diffkit::Linear embed;
  TimeEmbedding r_embed;
  TimeEmbedding t_embed;
  std::vector<DecoderBlock> blocks;
  diffkit::LayerNorm ln_out;
  diffkit::Linear head;

  static DecoderNet create(diffkit::ParamStore& ps, const std::string& name, const ModelConfig& cfg, bool uses_r,
                           Rng& rng);

  /// z [B, Nq, dim], r and t [B, 1], context [B, C, width] -> [B, Nq, dim].
  /// `r` is ignored (and may be unbound) when the net has no r input.
  diffkit::Var operator()(diffkit::Graph& g, const diffkit::Var& z, const diffkit::Var& r, const diffkit::Var& t,
                          const diffkit::Var& context) const;
};

}  // namespace mfplan::meanflow
