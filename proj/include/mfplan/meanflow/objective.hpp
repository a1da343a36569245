#pragma once

#include <cstdint>

#include "mfplan/core/error.hpp"
#include "mfplan/core/rng.hpp"
#include "mfplan/diffkit/jvp.hpp"
#include "mfplan/diffkit/ops.hpp"

namespace mfplan::meanflow {

using diffkit::Tensor;

struct TimePair {
  double r = 0.0;
  double t = 0.0;
};

/// Order statistics of two uniforms (r = min, t = max); with probability
/// `p_equal` r is set to t.
TimePair sample_time_pair(Rng& rng, double p_equal);
TimePair sample_time_pair(std::uint64_t seed, double p_equal);

struct Interpolant {
  Tensor z;
  Tensor v;
};

/// Data sits at t = 0 and noise at t = 1: z_t = (1 - t) x1 + t x0, v = x0 - x1.
Interpolant interpolate(const Tensor& x0, const Tensor& x1, double t);

/// u_tgt = v - (t - r) du, row b of v/du paired with r[b], t[b].
Tensor target_from_derivative(const Tensor& v, const Tensor& du, const Tensor& r, const Tensor& t);

/// Detached mean-flow target for the mean-velocity function `u` at (z, r, t)
/// with instantaneous velocity v, using the tangent (v, 0, 1).
Tensor meanflow_target(const diffkit::TimeFunction& u, const Tensor& z, const Tensor& r, const Tensor& t,
                       const Tensor& v, const diffkit::ParamStore* params = nullptr);

enum class LossVariant { l1, l2 };
const char* to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

/// Mean absolute (or squared) error against a constant target.
diffkit::Var flow_loss(const diffkit::Var& u, const Tensor& target, LossVariant variant = LossVariant::l1);

}  // namespace mfplan::meanflow
