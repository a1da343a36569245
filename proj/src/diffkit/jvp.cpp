#include "mfplan/diffkit/jvp.hpp"

namespace mfplan::diffkit {

JvpResult jvp(const TimeFunction& f, const Tensor& z, const Tensor& r, const Tensor& t, const Tensor& dz,
              const Tensor& dr, const Tensor& dt, const ParamStore* params) {
  Graph g(params, false);
  Var out = f(g, g.input(z, dz), g.input(r, dr), g.input(t, dt));
  JvpResult res{out.value(), Tensor(out.shape())};
  if (out.has_tangent()) res.derivative = out.tangent();
  return res;
}

}  // namespace mfplan::diffkit
