#include "mfplan/diffkit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace mfplan::diffkit {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
using Idx = Eigen::Index;

// c (+)= op(a) * op(b), where op(a) is rows x inner and op(b) is inner x cols.
void gemm(const double* a, bool ta, const double* b, bool tb, double* c, std::size_t rows, std::size_t inner,
          std::size_t cols, bool accumulate) {
  const auto r = static_cast<Idx>(rows), k = static_cast<Idx>(inner), n = static_cast<Idx>(cols);
  MMap out(c, r, n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      out.noalias() += lhs * rhs;
    } else {
      out.noalias() = lhs * rhs;
    }
  };
  if (!ta && !tb) {
    run(CMap(a, r, k), CMap(b, k, n));
  } else if (!ta) {
    run(CMap(a, r, k), CMap(b, n, k).transpose());
  } else if (!tb) {
    run(CMap(a, k, r).transpose(), CMap(b, k, n));
  } else {
    run(CMap(a, k, r).transpose(), CMap(b, n, k).transpose());
  }
}

const Tensor* tangent_of(const Var& v) { return v.has_tangent() ? &v.tangent() : nullptr; }

struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
  std::size_t a(std::size_t i) const { return same ? i : ia[i]; }
  std::size_t b(std::size_t i) const { return same ? i : ib[i]; }
};

std::shared_ptr<const Broadcast> plan_broadcast(const Shape& sa, const Shape& sb, const char* op) {
  auto plan = std::make_shared<Broadcast>();
  if (sa == sb) {
    plan->out = sa;
    plan->same = true;
    return plan;
  }
  const std::size_t rank = std::max(sa.size(), sb.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(sa.begin(), sa.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - sa.size()));
  std::copy(sb.begin(), sb.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - sb.size()));
  plan->out.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] == pb[d] || pb[d] == 1) {
      plan->out[d] = pa[d];
    } else if (pa[d] == 1) {
      plan->out[d] = pb[d];
    } else {
      throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(sa) + " with " + to_string(sb));
    }
  }
  std::vector<std::size_t> stride_a(rank, 0), stride_b(rank, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t d = rank; d-- > 0;) {
    stride_a[d] = pa[d] == 1 ? 0 : acc_a;
    stride_b[d] = pb[d] == 1 ? 0 : acc_b;
    acc_a *= pa[d];
    acc_b *= pb[d];
  }
  const std::size_t n = numel(plan->out);
  plan->ia.resize(n);
  plan->ib.resize(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset_a = 0, offset_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    plan->ia[i] = offset_a;
    plan->ib[i] = offset_b;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset_a += stride_a[d];
      offset_b += stride_b[d];
      if (counter[d] < plan->out[d]) break;
      offset_a -= stride_a[d] * counter[d];
      offset_b -= stride_b[d] * counter[d];
      counter[d] = 0;
    }
  }
  return plan;
}

enum class BinOp { add, sub, mul };

Var binary(BinOp kind, const char* name, const Var& a, const Var& b) {
  auto plan = plan_broadcast(a.shape(), b.shape(), name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(plan->out);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[plan->a(i)], y = bv[plan->b(i)];
    out[i] = kind == BinOp::add ? x + y : kind == BinOp::sub ? x - y : x * y;
  }
  std::optional<Tensor> tan;
  const Tensor* ta = tangent_of(a);
  const Tensor* tb = tangent_of(b);
  if (ta || tb) {
    tan.emplace(plan->out);
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = ta ? (*ta)[plan->a(i)] : 0.0;
      const double dy = tb ? (*tb)[plan->b(i)] : 0.0;
      switch (kind) {
        case BinOp::add: (*tan)[i] = dx + dy; break;
        case BinOp::sub: (*tan)[i] = dx - dy; break;
        case BinOp::mul: (*tan)[i] = dx * bv[plan->b(i)] + av[plan->a(i)] * dy; break;
      }
    }
  }
  auto backward = [a, b, plan, kind](Graph& g, const Tensor& go) {
    const std::size_t n = go.size();
    if (g.needs_grad(a)) {
      auto ga = g.grad_buffer(a);
      if (kind == BinOp::mul) {
        const Tensor& bv = b.value();
        for (std::size_t i = 0; i < n; ++i) ga[plan->a(i)] += go[i] * bv[plan->b(i)];
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[plan->a(i)] += go[i];
      }
    }
    if (g.needs_grad(b)) {
      auto gb = g.grad_buffer(b);
      if (kind == BinOp::mul) {
        const Tensor& av = a.value();
        for (std::size_t i = 0; i < n; ++i) gb[plan->b(i)] += go[i] * av[plan->a(i)];
      } else {
        const double sign = kind == BinOp::sub ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) gb[plan->b(i)] += sign * go[i];
      }
    }
  };
  return a.graph().emit(name, std::move(out), std::move(tan), {a, b}, backward);
}

// Elementwise unary op with derivative f'(x) evaluated from the input.
template <class F, class DF>
Var unary(const char* name, const Var& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) {
    tan.emplace(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) (*tan)[i] = df(xv[i]) * (*tx)[i];
  }
  auto backward = [x, df](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    auto gx = g.grad_buffer(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += df(xv[i]) * go[i];
  };
  return x.graph().emit(name, std::move(out), std::move(tan), {x}, backward);
}

// Splits `shape` around `axis` into (outer, extent, inner) block counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

// Scalar reductions sharing one shape: out = scale * sum(f(x)), d/dx = scale * f'(x).
template <class F, class DF>
Var reduce(const char* name, const Var& x, double scale_factor, F f, DF df) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += f(xv[i]);
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) {
    double t = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) t += df(xv[i]) * (*tx)[i];
    tan = Tensor::scalar(scale_factor * t);
  }
  auto backward = [x, scale_factor, df](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    auto gx = g.grad_buffer(x);
    const Tensor& xv = x.value();
    const double s = scale_factor * go[0];
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += s * df(xv[i]);
  };
  return x.graph().emit(name, Tensor::scalar(scale_factor * acc), std::move(tan), {x}, backward);
}

double gaussian_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gaussian_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Var add(const Var& a, const Var& b) { return binary(BinOp::add, "add", a, b); }
Var sub(const Var& a, const Var& b) { return binary(BinOp::sub, "sub", a, b); }
Var mul(const Var& a, const Var& b) { return binary(BinOp::mul, "mul", a, b); }

Var scale(const Var& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() != 2 || sa.empty() || sa.back() != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t k = sb[0], n = sb[1], rows = a.value().size() / k;
  Shape out_shape = sa;
  out_shape.back() = n;
  Tensor out(out_shape);
  gemm(a.value().data().data(), false, b.value().data().data(), false, out.data().data(), rows, k, n, false);
  std::optional<Tensor> tan;
  const Tensor* ta = tangent_of(a);
  const Tensor* tb = tangent_of(b);
  if (ta || tb) {
    tan.emplace(out_shape);
    if (ta) gemm(ta->data().data(), false, b.value().data().data(), false, tan->data().data(), rows, k, n, true);
    if (tb) gemm(a.value().data().data(), false, tb->data().data(), false, tan->data().data(), rows, k, n, true);
  }
  auto backward = [a, b, rows, k, n](Graph& g, const Tensor& go) {
    if (g.needs_grad(a)) {
      gemm(go.data().data(), false, b.value().data().data(), true, g.grad_buffer(a).data(), rows, n, k, true);
    }
    if (g.needs_grad(b)) {
      gemm(a.value().data().data(), true, go.data().data(), false, g.grad_buffer(b).data(), k, rows, n, true);
    }
  };
  return a.graph().emit("matmul", std::move(out), std::move(tan), {a, b}, backward);
}

Var bmm(const Var& a, const Var& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0]) {
    throw ShapeError("bmm: expected rank-3 operands with equal batch, got " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t batch = sa[0], m = sa[1], k = sa[2];
  const std::size_t n = transpose_b ? sb[1] : sb[2];
  if ((transpose_b ? sb[2] : sb[1]) != k) {
    throw ShapeError("bmm: inner extents differ " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t sa_step = m * k, sb_step = k * n, so_step = m * n;
  Tensor out(Shape{batch, m, n});
  const double* av = a.value().data().data();
  const double* bv = b.value().data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(av + i * sa_step, false, bv + i * sb_step, transpose_b, out.data().data() + i * so_step, m, k, n, false);
  }
  std::optional<Tensor> tan;
  const Tensor* ta = tangent_of(a);
  const Tensor* tb = tangent_of(b);
  if (ta || tb) {
    tan.emplace(Shape{batch, m, n});
    double* tv = tan->data().data();
    for (std::size_t i = 0; i < batch; ++i) {
      if (ta) gemm(ta->data().data() + i * sa_step, false, bv + i * sb_step, transpose_b, tv + i * so_step, m, k, n, true);
      if (tb) gemm(av + i * sa_step, false, tb->data().data() + i * sb_step, transpose_b, tv + i * so_step, m, k, n, true);
    }
  }
  auto backward = [a, b, transpose_b, batch, m, k, n](Graph& g, const Tensor& go) {
    const std::size_t sa_step = m * k, sb_step = k * n, so_step = m * n;
    const double* gov = go.data().data();
    if (g.needs_grad(a)) {
      double* ga = g.grad_buffer(a).data();
      const double* bv = b.value().data().data();
      for (std::size_t i = 0; i < batch; ++i) {
        gemm(gov + i * so_step, false, bv + i * sb_step, !transpose_b, ga + i * sa_step, m, n, k, true);
      }
    }
    if (g.needs_grad(b)) {
      double* gb = g.grad_buffer(b).data();
      const double* av = a.value().data().data();
      for (std::size_t i = 0; i < batch; ++i) {
        if (transpose_b) {
          gemm(gov + i * so_step, true, av + i * sa_step, false, gb + i * sb_step, n, m, k, true);
        } else {
          gemm(av + i * sa_step, true, gov + i * so_step, false, gb + i * sb_step, k, m, n, true);
        }
      }
    }
  };
  return a.graph().emit("bmm", std::move(out), std::move(tan), {a, b}, backward);
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  if (sw.size() != 2 || sx.empty() || sx.back() != sw[0] || bias.shape() != Shape{sw[1]}) {
    throw ShapeError("affine: incompatible shapes x" + to_string(sx) + " W" + to_string(sw) + " b" +
                     to_string(bias.shape()));
  }
  const std::size_t k = sw[0], n = sw[1], rows = x.value().size() / k;
  Shape out_shape = sx;
  out_shape.back() = n;
  Tensor out(out_shape);
  const double* xv = x.value().data().data();
  const double* wv = weight.value().data().data();
  const Tensor& bv = bias.value();
  gemm(xv, false, wv, false, out.data().data(), rows, k, n, false);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  }
  std::optional<Tensor> tan;
  const Tensor* tx = tangent_of(x);
  const Tensor* tw = tangent_of(weight);
  const Tensor* tbias = tangent_of(bias);
  if (tx || tw || tbias) {
    tan.emplace(out_shape);
    if (tx) gemm(tx->data().data(), false, wv, false, tan->data().data(), rows, k, n, true);
    if (tw) gemm(xv, false, tw->data().data(), false, tan->data().data(), rows, k, n, true);
    if (tbias) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) (*tan)[r * n + j] += (*tbias)[j];
      }
    }
  }
  auto backward = [x, weight, bias, rows, k, n](Graph& g, const Tensor& go) {
    if (g.needs_grad(x)) {
      gemm(go.data().data(), false, weight.value().data().data(), true, g.grad_buffer(x).data(), rows, n, k, true);
    }
    if (g.needs_grad(weight)) {
      gemm(x.value().data().data(), true, go.data().data(), false, g.grad_buffer(weight).data(), k, rows, n, true);
    }
    if (g.needs_grad(bias)) {
      auto gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += go[r * n + j];
      }
    }
  };
  return x.graph().emit("affine", std::move(out), std::move(tan), {x, weight, bias}, backward);
}

Var relu(const Var& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& x) {
  return unary(
      "gelu", x, [](double v) { return v * gaussian_cdf(v); },
      [](double v) { return gaussian_cdf(v) + v * gaussian_pdf(v); });
}

Var sin(const Var& x) {
  return unary("sin", x, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

Var cos(const Var& x) {
  return unary("cos", x, [](double v) { return std::cos(v); }, [](double v) { return -std::sin(v); });
}

Var layernorm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Shape& sx = x.shape();
  if (sx.empty() || gain.shape() != Shape{sx.back()} || bias.shape() != Shape{sx.back()}) {
    throw ShapeError("layernorm: gain/bias must match last axis of " + to_string(sx));
  }
  const std::size_t d = sx.back(), rows = x.value().size() / d;
  struct Cache {
    Tensor xhat;
    std::vector<double> rstd;
  };
  auto cache = std::make_shared<Cache>();
  cache->xhat = Tensor(sx);
  cache->rstd.resize(rows);
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(sx);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    cache->rstd[r] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * rstd;
      cache->xhat[r * d + j] = xh;
      out[r * d + j] = gv[j] * xh + bv[j];
    }
  }
  std::optional<Tensor> tan;
  const Tensor* tx = tangent_of(x);
  const Tensor* tg = tangent_of(gain);
  const Tensor* tb = tangent_of(bias);
  if (tx || tg || tb) {
    tan.emplace(sx);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xh = cache->xhat.data().data() + r * d;
      double* t = tan->data().data() + r * d;
      if (tx) {
        const double* dx = tx->data().data() + r * d;
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          m1 += dx[j];
          m2 += dx[j] * xh[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) t[j] += gv[j] * cache->rstd[r] * (dx[j] - m1 - xh[j] * m2);
      }
      if (tg) {
        for (std::size_t j = 0; j < d; ++j) t[j] += (*tg)[j] * xh[j];
      }
      if (tb) {
        for (std::size_t j = 0; j < d; ++j) t[j] += (*tb)[j];
      }
    }
  }
  auto backward = [x, gain, bias, cache, rows, d](Graph& g, const Tensor& go) {
    const Tensor& gv = gain.value();
    if (g.needs_grad(x)) {
      auto gx = g.grad_buffer(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xh = cache->xhat.data().data() + r * d;
        const double* gr = go.data().data() + r * d;
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dxh = gr[j] * gv[j];
          m1 += dxh;
          m2 += dxh * xh[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += cache->rstd[r] * (gr[j] * gv[j] - m1 - xh[j] * m2);
        }
      }
    }
    if (g.needs_grad(gain)) {
      auto gg = g.grad_buffer(gain);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) gg[j] += go[r * d + j] * cache->xhat[r * d + j];
      }
    }
    if (g.needs_grad(bias)) {
      auto gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) gb[j] += go[r * d + j];
      }
    }
  };
  return x.graph().emit("layernorm", std::move(out), std::move(tan), {x, gain, bias}, backward);
}

Var softmax(const Var& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.shape().size());
  const AxisSplit s = split_axis(x.shape(), ax);
  const Tensor& xv = x.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
    }
  }
  // y * (d - <y, d>) along the axis; shared by tangent and cotangent rules.
  auto contract = [s](const Tensor& y, std::span<const double> d, std::span<double> dst) {
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.extent; ++j) dot += y[base + j * s.inner] * d[base + j * s.inner];
        for (std::size_t j = 0; j < s.extent; ++j) {
          const std::size_t idx = base + j * s.inner;
          dst[idx] += y[idx] * (d[idx] - dot);
        }
      }
    }
  };
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) {
    tan.emplace(x.shape());
    contract(out, tx->data(), tan->data());
  }
  auto result = std::make_shared<Var>();
  auto backward = [x, contract, result](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    contract(result->value(), go.data(), g.grad_buffer(x));
  };
  *result = x.graph().emit("softmax", std::move(out), std::move(tan), {x}, backward);
  return *result;
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts.front().shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  std::vector<std::size_t> extents;
  Shape out_shape = first;
  out_shape[ax] = 0;
  bool any_tangent = false;
  for (const auto& p : parts) {
    const Shape& sp = p.shape();
    if (sp.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < sp.size(); ++d) {
      if (d != ax && sp[d] != first[d]) {
        throw ShapeError("concat: shape mismatch " + to_string(first) + " vs " + to_string(sp));
      }
    }
    extents.push_back(sp[ax]);
    out_shape[ax] += sp[ax];
    any_tangent = any_tangent || p.has_tangent();
  }
  const AxisSplit s = split_axis(out_shape, ax);
  auto gather = [&](auto source, std::span<double> dst) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::size_t block = extents[p] * s.inner;
      const double* src = source(p);
      for (std::size_t o = 0; o < s.outer; ++o) {
        double* d = dst.data() + o * s.extent * s.inner + offset;
        if (src) {
          std::copy(src + o * block, src + (o + 1) * block, d);
        }
      }
      offset += block;
    }
  };
  Tensor out(out_shape);
  gather([&](std::size_t p) { return parts[p].value().data().data(); }, out.data());
  std::optional<Tensor> tan;
  if (any_tangent) {
    tan.emplace(out_shape);
    gather(
        [&](std::size_t p) -> const double* {
          return parts[p].has_tangent() ? parts[p].tangent().data().data() : nullptr;
        },
        tan->data());
  }
  auto backward = [parts, extents, s](Graph& g, const Tensor& go) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::size_t block = extents[p] * s.inner;
      if (g.needs_grad(parts[p])) {
        auto gp = g.grad_buffer(parts[p]);
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = go.data().data() + o * s.extent * s.inner + offset;
          for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += src[i];
        }
      }
      offset += block;
    }
  };
  return parts.front().graph().emit("concat", std::move(out), std::move(tan), parts, backward);
}

Var slice(const Var& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = normalize_axis(axis, x.shape().size());
  if (begin >= end || end > x.shape()[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     to_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  auto take = [s, begin, block](std::span<const double> src, std::span<double> dst) {
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* from = src.data() + o * s.extent * s.inner + begin * s.inner;
      std::copy(from, from + block, dst.data() + o * block);
    }
  };
  Tensor out(out_shape);
  take(x.value().data(), out.data());
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) {
    tan.emplace(out_shape);
    take(tx->data(), tan->data());
  }
  auto backward = [x, s, begin, block](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    auto gx = g.grad_buffer(x);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* to = gx.data() + o * s.extent * s.inner + begin * s.inner;
      for (std::size_t i = 0; i < block; ++i) to[i] += go[o * block + i];
    }
  };
  return x.graph().emit("slice", std::move(out), std::move(tan), {x}, backward);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(shape);
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) tan = tx->reshaped(shape);
  auto backward = [x](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    auto gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  };
  return x.graph().emit("reshape", std::move(out), std::move(tan), {x}, backward);
}

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  const Shape& sx = x.shape();
  const std::size_t rank = sx.size();
  if (perm.size() != rank) throw ShapeError("permute: permutation rank mismatch");
  std::vector<bool> seen(rank, false);
  for (auto p : perm) {
    if (p >= rank || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(rank);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank; d-- > 1;) in_stride[d - 1] = in_stride[d] * sx[d];
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = sx[perm[d]];
  auto source = std::make_shared<std::vector<std::size_t>>(x.value().size());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < source->size(); ++i) {
    (*source)[i] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += in_stride[perm[d]];
      if (counter[d] < out_shape[d]) break;
      offset -= in_stride[perm[d]] * counter[d];
      counter[d] = 0;
    }
  }
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[(*source)[i]];
  std::optional<Tensor> tan;
  if (const Tensor* tx = tangent_of(x)) {
    tan.emplace(out_shape);
    for (std::size_t i = 0; i < out.size(); ++i) (*tan)[i] = (*tx)[(*source)[i]];
  }
  auto backward = [x, source](Graph& g, const Tensor& go) {
    if (!g.needs_grad(x)) return;
    auto gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[(*source)[i]] += go[i];
  };
  return x.graph().emit("permute", std::move(out), std::move(tan), {x}, backward);
}

Var sum(const Var& x) {
  return reduce("sum", x, 1.0, [](double v) { return v; }, [](double) { return 1.0; });
}

Var mean(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  return reduce("mean", x, inv, [](double v) { return v; }, [](double) { return 1.0; });
}

Var mean_abs(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  return reduce(
      "mean_abs", x, inv, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var mean_square(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  return reduce("mean_square", x, inv, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var stop_gradient(const Var& x) { return x.graph().constant(x.value()); }

Var map_opaque(const Var& x, const std::function<double(double)>& fn, const std::string& name) {
  if (x.has_tangent() || x.requires_grad()) {
    throw UnsupportedOp(name + ": opaque operation has no derivative rule");
  }
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fn(xv[i]);
  return x.graph().emit(name.c_str(), std::move(out), std::nullopt, {x}, nullptr);
}

}  // namespace mfplan::diffkit
