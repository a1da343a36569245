#include "mfplan/diffkit/layers.hpp"

#include <cmath>

namespace mfplan::diffkit {

Linear Linear::create(ParamStore& ps, std::string name, std::size_t in, std::size_t out, Rng& rng, Init init) {
  Tensor w(Shape{in, out});
  Tensor b(Shape{out});
  if (init == Init::uniform) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }
  ps.add(name + ".weight", std::move(w));
  ps.add(name + ".bias", std::move(b));
  return Linear{std::move(name), in, out};
}

Var Linear::operator()(Graph& g, const Var& x) const {
  return affine(x, g.param(name + ".weight"), g.param(name + ".bias"));
}

LayerNorm LayerNorm::create(ParamStore& ps, std::string name, std::size_t dim) {
  ps.add(name + ".gain", Tensor(Shape{dim}, 1.0));
  ps.add(name + ".bias", Tensor(Shape{dim}));
  return LayerNorm{std::move(name), dim};
}

Var LayerNorm::operator()(Graph& g, const Var& x) const {
  return layernorm(x, g.param(name + ".gain"), g.param(name + ".bias"));
}

FeedForward FeedForward::create(ParamStore& ps, const std::string& name, std::size_t width, std::size_t hidden,
                                std::size_t out, Rng& rng) {
  return FeedForward{Linear::create(ps, name + ".fc1", width, hidden, rng),
                     Linear::create(ps, name + ".fc2", hidden, out, rng)};
}

Var FeedForward::operator()(Graph& g, const Var& x) const { return fc2(g, gelu(fc1(g, x))); }

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& name, std::size_t width,
                                              std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                     " heads");
  }
  MultiHeadAttention m;
  m.width = width;
  m.heads = heads;
  m.q = Linear::create(ps, name + ".q", width, width, rng);
  m.k = Linear::create(ps, name + ".k", width, width, rng);
  m.v = Linear::create(ps, name + ".v", width, width, rng);
  m.o = Linear::create(ps, name + ".o", width, width, rng);
  return m;
}

Var MultiHeadAttention::operator()(Graph& g, const Var& queries, const Var& memory, Var* weights) const {
  const Shape& sq = queries.shape();
  const Shape& sm = memory.shape();
  if (sq.size() != 3 || sm.size() != 3 || sq[0] != sm[0] || sq[2] != width || sm[2] != width) {
    throw ShapeError("attention: expected [B,Nq," + std::to_string(width) + "] and [B,Nk," +
                     std::to_string(width) + "], got " + to_string(sq) + " and " + to_string(sm));
  }
  const std::size_t batch = sq[0], nq = sq[1], nk = sm[1], dh = width / heads;
  auto split = [&](const Var& x, std::size_t n) {
    if (heads == 1) return x;
    Var y = permute(reshape(x, {batch, n, heads, dh}), {0, 2, 1, 3});
    return reshape(y, {batch * heads, n, dh});
  };
  Var qh = split(q(g, queries), nq);
  Var kh = split(k(g, memory), nk);
  Var vh = split(v(g, memory), nk);
  Var scores = scale(bmm(qh, kh, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var attn = softmax(scores, -1);
  if (weights) *weights = attn;
  Var ctx = bmm(attn, vh);
  if (heads != 1) ctx = reshape(permute(reshape(ctx, {batch, heads, nq, dh}), {0, 2, 1, 3}), {batch, nq, width});
  return o(g, ctx);
}

}  // namespace mfplan::diffkit
