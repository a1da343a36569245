#include "mfplan/core/error.hpp"
#include "mfplan/meanflow/objective.hpp"

#include <algorithm>

namespace mfplan::meanflow {

using namespace diffkit;

TimePair sample_time_pair(Rng& rng, double p_equal) {
  const double a = rng.uniform(), b = rng.uniform();
  TimePair p{std::min(a, b), std::max(a, b)};
  if (rng.uniform() < p_equal) p.r = p.t;
  return p;
}

TimePair sample_time_pair(std::uint64_t seed, double p_equal) {
  Rng rng(seed);
  return sample_time_pair(rng, p_equal);
}

Interpolant interpolate(const Tensor& x0, const Tensor& x1, double t) {
  if (x0.shape() != x1.shape()) {
    throw ShapeError("interpolate: shapes " + diffkit::to_string(x0.shape()) + " and " + diffkit::to_string(x1.shape()) + " differ");
  }
  Interpolant out{Tensor(x0.shape()), Tensor(x0.shape())};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.z[i] = (1.0 - t) * x1[i] + t * x0[i];
    out.v[i] = x0[i] - x1[i];
  }
  return out;
}

Tensor target_from_derivative(const Tensor& v, const Tensor& du, const Tensor& r, const Tensor& t) {
  if (v.shape() != du.shape() || r.size() != t.size() || v.size() % t.size() != 0) {
    throw ShapeError("meanflow target: inconsistent shapes");
  }
  const std::size_t per_row = v.size() / t.size();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t b = i / per_row;
    out[i] = v[i] - (t[b] - r[b]) * du[i];
  }
  out.require_finite("meanflow target");
  return out;
}

Tensor meanflow_target(const TimeFunction& u, const Tensor& z, const Tensor& r, const Tensor& t, const Tensor& v,
                       const ParamStore* params) {
  const auto res = jvp(u, z, r, t, v, Tensor(r.shape()), Tensor(t.shape(), 1.0), params);
  res.derivative.require_finite("meanflow target jvp");
  return target_from_derivative(v, res.derivative, r, t);
}

const char* to_string(LossVariant v) { return v == LossVariant::l1 ? "l1" : "l2"; }

LossVariant parse_loss_variant(const std::string& s) {
  if (s == "l1") return LossVariant::l1;
  if (s == "l2") return LossVariant::l2;
  throw ArgumentError("unknown loss variant '" + s + "' (expected l1 or l2)");
}

Var flow_loss(const Var& u, const Tensor& target, LossVariant variant) {
  Var diff = sub(u, u.graph().constant(target));
  return variant == LossVariant::l1 ? mean_abs(diff) : mean_square(diff);
}

}  // namespace mfplan::meanflow
