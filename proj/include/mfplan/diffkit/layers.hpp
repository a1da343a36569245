#pragma once

#include <cstddef>
#include <string>

#include "mfplan/core/rng.hpp"
#include "mfplan/diffkit/graph.hpp"
#include "mfplan/diffkit/ops.hpp"

namespace mfplan::diffkit {

enum class Init { uniform, zeros };

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and bias, or all zeros.
struct Linear {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParamStore& ps, std::string name, std::size_t in, std::size_t out, Rng& rng,
                       Init init = Init::uniform);
  Var operator()(Graph& g, const Var& x) const;
};

struct LayerNorm {
  std::string name;
  std::size_t dim = 0;

  static LayerNorm create(ParamStore& ps, std::string name, std::size_t dim);
  Var operator()(Graph& g, const Var& x) const;
};

struct FeedForward {
  Linear fc1;
  Linear fc2;

  static FeedForward create(ParamStore& ps, const std::string& name, std::size_t width, std::size_t hidden,
                            std::size_t out, Rng& rng);
  Var operator()(Graph& g, const Var& x) const;
};

/// Scaled dot-product attention of queries [B, Nq, W] over keys/values
/// [B, Nk, W]. `weights`, when given, receives the softmax output
/// [B * heads, Nq, Nk].
struct MultiHeadAttention {
  std::size_t width = 0;
  std::size_t heads = 1;
  Linear q, k, v, o;

  static MultiHeadAttention create(ParamStore& ps, const std::string& name, std::size_t width, std::size_t heads,
                                   Rng& rng);
  Var operator()(Graph& g, const Var& queries, const Var& memory, Var* weights = nullptr) const;
};

}  // namespace mfplan::diffkit
