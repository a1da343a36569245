#pragma once

// Finite-difference reference computations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>

#include "mfplan/core/rng.hpp"
#include "mfplan/diffkit/graph.hpp"
#include "mfplan/diffkit/jvp.hpp"

namespace oracle {

using mfplan::diffkit::Graph;
using mfplan::diffkit::ParamStore;
using mfplan::diffkit::Shape;
using mfplan::diffkit::Tensor;
using mfplan::diffkit::Var;

inline Tensor random_tensor(const Shape& shape, mfplan::Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-4) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double eval_loss(const ParamStore& ps, const std::function<Var(Graph&)>& loss_fn) {
  Graph g(&ps, false);
  return loss_fn(g).value().item();
}

/// Worst per-parameter relative error between reverse-mode gradients and
/// central differences of `loss_fn`.
inline double gradient_error(ParamStore& ps, const std::function<Var(Graph&)>& loss_fn, double h = 1e-5) {
  {
    Graph g(&ps);
    mfplan::diffkit::backward(loss_fn(g), ps);
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < ps.size(); ++s) {
    const Tensor analytic = ps.slot(s).grad;
    Tensor numeric(analytic.shape());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double& w = ps.slot(s).value[i];
      const double saved = w;
      w = saved + h;
      const double up = eval_loss(ps, loss_fn);
      w = saved - h;
      const double down = eval_loss(ps, loss_fn);
      w = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

/// Relative error between the forward-mode directional derivative and a
/// central difference along the same direction.
inline double jvp_error(const mfplan::diffkit::TimeFunction& f, const Tensor& z, const Tensor& r, const Tensor& t,
                        const Tensor& dz, const Tensor& dr, const Tensor& dt, const ParamStore* ps,
                        double h = 1e-5) {
  const auto res = mfplan::diffkit::jvp(f, z, r, t, dz, dr, dt, ps);
  auto at = [&](double s) {
    Graph g(ps, false);
    return f(g, g.constant(z + s * dz), g.constant(r + s * dr), g.constant(t + s * dt)).value();
  };
  const Tensor numeric = (1.0 / (2.0 * h)) * (at(h) - at(-h));
  return relative_error(res.derivative, numeric);
}

}  // namespace oracle
