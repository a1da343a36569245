#include "mfplan/meanflow/decoder.hpp"

#include <cmath>

namespace mfplan::meanflow {

using namespace diffkit;

TimeEmbedding TimeEmbedding::create(ParamStore& ps, const std::string& name, std::size_t width, double max_frequency,
                                    Rng& rng) {
  if (width < 4 || width % 2 != 0) throw ShapeError("time embedding width must be even and at least 4");
  return TimeEmbedding{width, max_frequency, Linear::create(ps, name + ".proj", width, width, rng)};
}

Var TimeEmbedding::operator()(Graph& g, const Var& time) const {
  const std::size_t half = width / 2;
  Tensor freqs(Shape{half});
  for (std::size_t j = 0; j < half; ++j) {
    freqs[j] = std::exp(static_cast<double>(j) / static_cast<double>(half - 1) * std::log(max_frequency));
  }
  Var phase = mul(time, g.constant(std::move(freqs)));
  Var feats = concat({sin(phase), cos(phase)}, 1);
  const std::size_t b = time.shape()[0];
  return reshape(proj(g, feats), {b, 1, width});
}

DecoderNet DecoderNet::create(ParamStore& ps, const std::string& name, const ModelConfig& cfg, bool uses_r,
                              Rng& rng) {
  DecoderNet net;
  net.cfg = cfg;
  net.uses_r = uses_r;
  net.embed = Linear::create(ps, name + ".embed", cfg.dim(), cfg.width, rng);
  if (uses_r) net.r_embed = TimeEmbedding::create(ps, name + ".r_embed", cfg.width, cfg.max_frequency, rng);
  net.t_embed = TimeEmbedding::create(ps, name + ".t_embed", cfg.width, cfg.max_frequency, rng);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string p = name + ".block" + std::to_string(i);
    DecoderBlock b;
    b.ln_query = LayerNorm::create(ps, p + ".ln_query", cfg.width);
    b.ln_memory = LayerNorm::create(ps, p + ".ln_memory", cfg.width);
    b.attn = MultiHeadAttention::create(ps, p + ".attn", cfg.width, cfg.heads, rng);
    b.ln_ffn = LayerNorm::create(ps, p + ".ln_ffn", cfg.width);
    b.ffn = FeedForward::create(ps, p + ".ffn", cfg.width, cfg.ffn_hidden, cfg.width, rng);
    net.blocks.push_back(std::move(b));
  }
  net.ln_out = LayerNorm::create(ps, name + ".ln_out", cfg.width);
  net.head = Linear::create(ps, name + ".head", cfg.width, cfg.dim(), rng, cfg.zero_head ? Init::zeros : Init::uniform);
  return net;
}

Var DecoderNet::operator()(Graph& g, const Var& z, const Var& r, const Var& t, const Var& context) const {
  const Shape& sz = z.shape();
  if (sz.size() != 3 || sz[2] != cfg.dim()) {
    throw ShapeError("decoder: noise must be [B, Nq, " + std::to_string(cfg.dim()) + "], got " + to_string(sz));
  }
  std::vector<Var> mem{context};
  if (uses_r) mem.push_back(r_embed(g, r));
  mem.push_back(t_embed(g, t));
  Var memory = concat(mem, 1);
  Var h = embed(g, z);
  for (const auto& b : blocks) {
    h = add(h, b.attn(g, b.ln_query(g, h), b.ln_memory(g, memory)));
    h = add(h, b.ffn(g, b.ln_ffn(g, h)));
  }
  return head(g, ln_out(g, h));
}

}  // namespace mfplan::meanflow
