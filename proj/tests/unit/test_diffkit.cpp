#include <cmath>

#include "doctest.h"
#include "mfplan/diffkit/layers.hpp"
#include "mfplan/diffkit/optim.hpp"
#include "../support/oracles.hpp"

using namespace mfplan;
using namespace mfplan::diffkit;

namespace {

// Random scalar head: sum(f(..) * R) for a fixed random R.
Var head(Graph& g, const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, g.constant(oracle::random_tensor(y.shape(), rng))));
}

ParamStore store(std::initializer_list<std::pair<const char*, Shape>> specs, std::uint64_t seed) {
  ParamStore ps;
  Rng rng(seed);
  for (const auto& [name, shape] : specs) ps.add(name, oracle::random_tensor(shape, rng));
  return ps;
}

}  // namespace

TEST_CASE("elementwise examples") {
  Graph g;
  auto a = g.constant(Tensor::vector({1, 2}));
  auto b = g.constant(Tensor::vector({3, 4}));
  CHECK(add(a, b).value() == Tensor::vector({4, 6}));
  CHECK(sub(a, b).value() == Tensor::vector({-2, -2}));
  CHECK(mul(a, b).value() == Tensor::vector({3, 8}));

  Rng rng(3);
  auto m = oracle::random_tensor({3, 3}, rng);
  CHECK(matmul(g.constant(Tensor::identity(3)), g.constant(m)).value() == m);

  auto s = softmax(g.constant(Tensor::vector({0, 0, 0}))).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("broadcasting and shape errors") {
  Graph g;
  auto a = g.constant(Tensor(Shape{2, 3}, 1.0));
  auto row = g.constant(Tensor::vector({1, 2, 3}));
  auto col = g.constant(Tensor(Shape{2, 1}, 10.0));
  CHECK(add(a, row).shape() == Shape{2, 3});
  CHECK(add(a, row).value()[5] == 4.0);
  CHECK(add(a, col).value()[4] == 11.0);
  CHECK_THROWS_AS(add(a, g.constant(Tensor::vector({1, 2}))), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("non-finite results are errors") {
  Graph g;
  auto big = g.constant(Tensor::vector({1e308}));
  CHECK_THROWS_AS(scale(big, 10.0), NumericError);
  CHECK_THROWS_AS(g.constant(Tensor::vector({std::nan("")})), NumericError);
}

TEST_CASE("backward examples") {
  ParamStore ps;
  ps.add("w", Tensor::vector({1, 2}));
  ps.add("u", Tensor::vector({5}));
  auto loss_fn = [](Graph& g) {
    auto w = g.param("w");
    return sum(mul(w, w));
  };
  {
    Graph g(&ps);
    backward(loss_fn(g), ps);
  }
  CHECK(ps.grad("w") == Tensor::vector({2, 4}));
  CHECK_FALSE(ps.has_grad("u"));

  SUBCASE("fresh graph overwrites") {
    Graph g(&ps);
    backward(loss_fn(g), ps);
    CHECK(ps.grad("w") == Tensor::vector({2, 4}));
  }
  SUBCASE("explicit accumulation adds") {
    Graph g(&ps);
    backward(loss_fn(g), ps, true);
    CHECK(ps.grad("w") == Tensor::vector({4, 8}));
  }
  SUBCASE("constant loss gives zero gradients") {
    Graph g(&ps);
    backward(sum(g.constant(Tensor::vector({3, 4}))), ps);
    CHECK(ps.grad("w") == Tensor::vector({0, 0}));
    CHECK(ps.grad("u") == Tensor::vector({0}));
  }
  SUBCASE("errors") {
    Graph g(&ps);
    CHECK_THROWS_AS(backward(g.param("w"), ps), ShapeError);
    Graph frozen(&ps, false);
    CHECK_THROWS(backward(loss_fn(frozen), ps));
  }
}

TEST_CASE("stop_gradient blocks the reverse sweep") {
  ParamStore ps;
  ps.add("w", Tensor::vector({1.5, -2}));
  Graph g(&ps);
  auto w = g.param("w");
  backward(sum(mul(w, stop_gradient(w))), ps);
  CHECK(ps.grad("w") == Tensor::vector({1.5, -2}));
}

TEST_CASE("primitive gradients match central differences") {
  const double tol = 1e-5;
  SUBCASE("arithmetic with broadcasting") {
    auto ps = store({{"a", {3, 4}}, {"b", {4}}, {"c", {3, 1}}}, 1);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            auto y = mul(add(g.param("a"), g.param("b")), sub(g.param("c"), g.param("a")));
            return head(g, scale(y, 0.7), 11);
          }) < tol);
  }
  SUBCASE("matmul") {
    auto ps = store({{"a", {2, 3, 4}}, {"b", {4, 5}}}, 2);
    CHECK(oracle::gradient_error(ps, [](Graph& g) { return head(g, matmul(g.param("a"), g.param("b")), 12); }) <
          tol);
  }
  SUBCASE("bmm") {
    auto ps = store({{"a", {2, 3, 4}}, {"b", {2, 4, 5}}, {"bt", {2, 5, 4}}}, 3);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            auto y = add(bmm(g.param("a"), g.param("b")), bmm(g.param("a"), g.param("bt"), true));
            return head(g, y, 13);
          }) < tol);
  }
  SUBCASE("affine and activations") {
    auto ps = store({{"x", {5, 3}}, {"w", {3, 4}}, {"b", {4}}}, 4);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            auto y = affine(g.param("x"), g.param("w"), g.param("b"));
            return head(g, concat({gelu(y), relu(y), sin(y), cos(y)}, 0), 14);
          }) < tol);
  }
  SUBCASE("layernorm") {
    auto ps = store({{"x", {4, 6}}, {"gain", {6}}, {"bias", {6}}}, 5);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            return head(g, layernorm(g.param("x"), g.param("gain"), g.param("bias")), 15);
          }) < tol);
  }
  SUBCASE("softmax on every axis") {
    auto ps = store({{"x", {2, 3, 4}}}, 6);
    for (int axis : {0, 1, 2}) {
      CHECK(oracle::gradient_error(ps, [axis](Graph& g) { return head(g, softmax(g.param("x"), axis), 16); }) <
            tol);
    }
  }
  SUBCASE("shape ops") {
    auto ps = store({{"x", {2, 3, 4}}, {"y", {2, 2, 4}}}, 7);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            auto c = concat({g.param("x"), g.param("y")}, 1);
            auto p = permute(slice(c, 1, 1, 4), {2, 0, 1});
            return head(g, reshape(p, {4, 6}), 17);
          }) < tol);
  }
  SUBCASE("reductions") {
    auto ps = store({{"x", {3, 5}}}, 8);
    CHECK(oracle::gradient_error(ps, [](Graph& g) {
            auto x = g.param("x");
            return add(add(mean(x), mean_abs(x)), scale(mean_square(x), 0.3));
          }) < tol);
  }
}

TEST_CASE("random two-layer network gradient") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParamStore ps;
    Rng rng(seed);
    auto l1 = Linear::create(ps, "l1", 6, 16, rng);
    auto l2 = Linear::create(ps, "l2", 16, 3, rng);
    const Tensor x = oracle::random_tensor({4, 6}, rng);
    const Tensor target = oracle::random_tensor({4, 3}, rng);
    CHECK(oracle::gradient_error(ps, [&](Graph& g) {
            auto y = l2(g, gelu(l1(g, g.constant(x))));
            return mean_square(sub(y, g.constant(target)));
          }) < 1e-5);
  }
}

TEST_CASE("jvp examples") {
  const Tensor z0 = Tensor::vector({1.0, -2.0, 0.5});
  const Tensor v = Tensor::vector({0.3, 0.1, -0.7});
  const Tensor r = Tensor::scalar(0.2), t = Tensor::scalar(0.6);
  const Tensor zero = Tensor::scalar(0.0), one = Tensor::scalar(1.0);

  auto ident = jvp([](Graph&, const Var& z, const Var&, const Var&) { return z; }, z0, r, t, v, zero, one);
  CHECK(ident.value == z0);
  CHECK(ident.derivative == v);

  auto prod = jvp([](Graph&, const Var& z, const Var&, const Var& tt) { return mul(tt, z); }, z0, r, t, v, zero, one);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(prod.value[i] == doctest::Approx(0.6 * z0[i]));
    CHECK(prod.derivative[i] == doctest::Approx(0.6 * v[i] + z0[i]));
  }

  CHECK_THROWS_AS(jvp([](Graph&, const Var& z, const Var&, const Var&) { return z; }, z0, r, t, one, zero, one),
                  ShapeError);
  CHECK_THROWS_AS(jvp([](Graph&, const Var& z, const Var&, const Var&) {
                        return map_opaque(z, [](double x) { return std::floor(x); }, "floor");
                      },
                      z0, r, t, v, zero, one),
                  UnsupportedOp);
}

namespace {

struct SmallNet {
  ParamStore ps;
  Linear in, time, out;
  explicit SmallNet(std::uint64_t seed) {
    Rng rng(seed);
    in = Linear::create(ps, "in", 4, 8, rng);
    time = Linear::create(ps, "time", 2, 8, rng);
    out = Linear::create(ps, "out", 8, 4, rng);
  }
  Var operator()(Graph& g, const Var& z, const Var& r, const Var& t) const {
    auto rt = reshape(concat({reshape(r, {1}), reshape(t, {1})}, 0), {1, 2});
    auto h = gelu(add(in(g, z), time(g, sin(rt))));
    auto ln = layernorm(h, g.constant(Tensor(Shape{8}, 1.0)), g.constant(Tensor(Shape{8})));
    return out(g, mul(softmax(ln), h));
  }
};

}  // namespace

TEST_CASE("jvp matches finite differences, is linear, and agrees with reverse mode") {
  SmallNet net(21);
  auto f = [&](Graph& g, const Var& z, const Var& r, const Var& t) { return net(g, z, r, t); };
  Rng rng(5);
  const Tensor z = oracle::random_tensor({1, 4}, rng);
  const Tensor r = Tensor::scalar(0.3), t = Tensor::scalar(0.8);
  const Tensor u = oracle::random_tensor({1, 4}, rng), w = oracle::random_tensor({1, 4}, rng);
  const Tensor zero = Tensor::scalar(0.0), one = Tensor::scalar(1.0);

  CHECK(oracle::jvp_error(f, z, r, t, u, zero, one, &net.ps) < 1e-6);

  const double a = 0.7, b = -1.3;
  const auto ju = jvp(f, z, r, t, u, zero, zero, &net.ps);
  const auto jw = jvp(f, z, r, t, w, zero, zero, &net.ps);
  const auto jc = jvp(f, z, r, t, a * u + b * w, zero, zero, &net.ps);
  CHECK(max_abs_diff(jc.derivative, a * ju.derivative + b * jw.derivative) < 1e-10);

  // Scalar head: directional derivative along e_i is the i-th gradient entry.
  auto scalar_f = [&](Graph& g, const Var& zz, const Var& rr, const Var& tt) { return sum(net(g, zz, rr, tt)); };
  Graph g(&net.ps);
  auto zin = g.input(z, std::nullopt, true);
  auto loss = scalar_f(g, zin, g.constant(r), g.constant(t));
  g.backward(loss);
  const Tensor* grad = g.grad(zin);
  REQUIRE(grad);
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor e(Shape{1, 4});
    e[i] = 1.0;
    const auto j = jvp(scalar_f, z, r, t, e, zero, zero, &net.ps);
    CHECK(std::abs(j.derivative.item() - (*grad)[i]) < 1e-8);
  }
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(9);
  Graph g;
  for (int trial = 0; trial < 20; ++trial) {
    auto x = g.constant(oracle::random_tensor({3, 7}, rng, 5.0));
    for (int axis : {0, 1}) {
      const Tensor y = softmax(x, axis).value();
      const std::size_t outer = axis == 0 ? 7 : 3, n = axis == 0 ? 3 : 7;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double p = axis == 0 ? y[j * 7 + o] : y[o * 7 + j];
          CHECK(p >= 0.0);
          total += p;
        }
        CHECK(std::abs(total - 1.0) < 1e-10);
      }
    }
  }
}

TEST_CASE("adamw") {
  SUBCASE("zero gradient without decay leaves parameters") {
    ParamStore ps;
    ps.add("w", Tensor::vector({1, -2, 3}));
    ps.slot(0).has_grad = true;
    adamw_step(ps, {.lr = 0.1, .weight_decay = 0.0});
    CHECK(ps.value("w") == Tensor::vector({1, -2, 3}));
  }
  SUBCASE("descends on w^2") {
    ParamStore ps;
    ps.add("w", Tensor::vector({1}));
    Graph g(&ps);
    auto w = g.param("w");
    backward(sum(mul(w, w)), ps);
    adamw_step(ps, {.lr = 0.1});
    CHECK(ps.value("w")[0] < 1.0);
  }
  SUBCASE("converges on a convex quadratic") {
    ParamStore ps;
    ps.add("w", Tensor::vector({2.0, -1.0, 0.5}));
    const Tensor c = Tensor::vector({0.3, 0.7, -1.2});
    const Tensor weights = Tensor::vector({1.0, 3.0, 0.5});
    auto loss_fn = [&](Graph& g) {
      auto d = sub(g.param("w"), g.constant(c));
      return sum(mul(g.constant(weights), mul(d, d)));
    };
    const std::size_t steps = 200;
    for (std::size_t s = 0; s < steps; ++s) {
      Graph g(&ps);
      backward(loss_fn(g), ps);
      adamw_step(ps, {.lr = cosine_lr(s, steps, 0.1, 0), .weight_decay = 0.0});
    }
    CHECK(oracle::eval_loss(ps, loss_fn) < 1e-6);
  }
  SUBCASE("missing gradients") {
    ParamStore ps;
    ps.add("w", Tensor::vector({1}));
    CHECK_THROWS_AS(adamw_step(ps, {}), MissingGradient);
  }
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 2e-4, 10) == 0.0);
  CHECK(cosine_lr(10, 100, 2e-4, 10) == doctest::Approx(2e-4));
  CHECK(std::abs(cosine_lr(100, 100, 2e-4, 10)) < 1e-12);
  CHECK(cosine_lr(5, 100, 2e-4, 10) == doctest::Approx(1e-4));
  CHECK(cosine_lr(55, 100, 2e-4, 10) == doctest::Approx(1e-4));
  CHECK(std::abs(cosine_lr(500, 100, 2e-4, 10)) < 1e-12);
}

TEST_CASE("attention weights") {
  ParamStore ps;
  Rng rng(4);
  auto mha = MultiHeadAttention::create(ps, "mha", 8, 2, rng);
  Graph g(&ps);
  auto q = g.constant(oracle::random_tensor({3, 2, 8}, rng));
  auto kv = g.constant(oracle::random_tensor({3, 5, 8}, rng));
  Var w;
  auto y = mha(g, q, kv, &w);
  CHECK(y.shape() == Shape{3, 2, 8});
  CHECK(w.shape() == Shape{6, 2, 5});
  CHECK(oracle::gradient_error(ps, [&](Graph& gg) {
          auto qq = gg.constant(q.value());
          auto kk = gg.constant(kv.value());
          return head(gg, mha(gg, qq, kk), 3);
        }) < 1e-5);
}
