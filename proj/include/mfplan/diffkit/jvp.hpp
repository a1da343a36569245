#pragma once

#include <functional>

#include "mfplan/diffkit/graph.hpp"

namespace mfplan::diffkit {

struct JvpResult {
  Tensor value;
  Tensor derivative;
};

using TimeFunction = std::function<Var(Graph&, const Var& z, const Var& r, const Var& t)>;

/// Evaluates f(z, r, t) and its directional derivative along (dz, dr, dt) in
/// one forward sweep. No reverse pass is recorded.
JvpResult jvp(const TimeFunction& f, const Tensor& z, const Tensor& r, const Tensor& t, const Tensor& dz,
              const Tensor& dr, const Tensor& dt, const ParamStore* params = nullptr);

}  // namespace mfplan::diffkit
