// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dualmfa/error.hpp"
#include "dualmfa/gradcheck.hpp"
#include "dualmfa/graph.hpp"
#include "test_support.hpp"

using namespace dualmfa;
using testsup::random_tensor;

TEST_CASE("matmul: identity and hand-checked products") {
  Graph g;
  Var eye = g.leaf(Tensor({2, 2}, {1, 0, 0, 1}));
  Var col = g.leaf(Tensor({2, 1}, {3, 4}));
  const Tensor& out = g.value(g.matmul(eye, col));
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 4.0);

  Var row = g.leaf(Tensor({1, 2}, {1, 2}));
  const Tensor& prod = g.value(g.matmul(row, col));
  CHECK(prod[0] == 11.0);
}

TEST_CASE("matmul: random product matches scalar triple-loop oracle") {
  std::mt19937_64 rng(42);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  Graph g;
  const Tensor& out = g.value(g.matmul(g.leaf(a), g.leaf(b)));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 4; ++k) want += a.at(i, k) * b.at(k, j);
      CHECK(out.at(i, j) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Graph g;
  Var a = g.leaf(Tensor({2, 3}));
  Var b = g.leaf(Tensor({2, 2}));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), dimension_error);
  try {
    g.matmul(a, b);
  } catch (const dimension_error& e) {
    CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("unary_map: fixed points and exponential identity") {
  Graph g;
  Var x = g.leaf(Tensor({3}, {0.0, 0.0, 0.3}));
  const Tensor& th = g.value(g.tanh(x));
  const Tensor& sg = g.value(g.sigmoid(x));
  CHECK(th[0] == 0.0);
  CHECK(sg[0] == 0.5);
  // tanh(x) = (e^{2x} - 1) / (e^{2x} + 1)
  const double e2x = std::exp(0.6);
  CHECK(th[2] == doctest::Approx((e2x - 1) / (e2x + 1)).epsilon(1e-15));
}

TEST_CASE("hadamard: identity, fixed product and shape checks") {
  Graph g;
  Var a = g.leaf(Tensor({3}, {1, 2, 3}));
  Var ones = g.leaf(Tensor::full({3}, 1.0));
  const Tensor& id = g.value(g.hadamard(a, ones));
  for (std::size_t i = 0; i < 3; ++i) CHECK(id[i] == g.value(a)[i]);

  Var b = g.leaf(Tensor({3}, {4, 5, 6}));
  const Tensor& prod = g.value(g.hadamard(a, b));
  CHECK(prod[0] == 4.0);
  CHECK(prod[1] == 10.0);
  CHECK(prod[2] == 18.0);

  CHECK_THROWS_AS(g.hadamard(a, g.leaf(Tensor({4}))), dimension_error);
}

TEST_CASE("hadamard: gradient w.r.t. one factor is the other times upstream") {
  std::mt19937_64 rng(7);
  const Tensor b = random_tensor({5}, rng);
  const Tensor w = random_tensor({5}, rng);
  auto f = [&](Graph& g, Var x) {
    return g.sum_all(g.hadamard(g.hadamard(x, g.leaf(b)), g.leaf(w)));
  };
  const Tensor x = random_tensor({5}, rng);
  CHECK(finite_diff_check(f, x, 1e-6) < 1e-9);

  Graph g;
  Var xv = g.leaf(x, true);
  g.backward(f(g, xv));
  const Tensor& grad = g.grad(xv);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(grad[i] == doctest::Approx(b[i] * w[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax_axis: symmetry, stability, direct formula") {
  Graph g;
  const Tensor& sym = g.value(g.softmax_axis(g.leaf(Tensor({3}, {0, 0, 0})), 0));
  for (std::size_t i = 0; i < 3; ++i) CHECK(sym[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const Tensor& big = g.value(g.softmax_axis(g.leaf(Tensor({2}, {1000, 1000})), 0));
  CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(big.all_finite());

  const Tensor& sm = g.value(g.softmax_axis(g.leaf(Tensor({3}, {1, 2, 3})), 0));
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sm[i] == doctest::Approx(std::exp(1.0 + i) / denom).epsilon(1e-12));
  }
}

TEST_CASE("softmax_axis: rows are probability vectors across 1000 random draws") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale_dist(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double scale = std::pow(10.0, scale_dist(rng));  // magnitudes up to 1e3
    const Tensor x = random_tensor({4, 5}, rng, -scale, scale);
    Graph g;
    const Tensor& y = g.value(g.softmax_axis(g.leaf(x), 1));
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(y.at(r, c) >= 0.0);
        sum += y.at(r, c);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("l2_normalize_axis: 3-4-5 triangle and the zero-vector guard") {
  Graph g;
  const Tensor& unit = g.value(g.l2_normalize_axis(g.leaf(Tensor({2}, {3, 4})), {0}));
  CHECK(unit[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(unit[1] == doctest::Approx(0.8).epsilon(1e-15));

  const Tensor& zero = g.value(g.l2_normalize_axis(g.leaf(Tensor({3})), {0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(zero[i] == 0.0);
}

TEST_CASE("l2_normalize_axis: unit norms when input norm exceeds eps") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({6, 4}, rng, 0.1, 2.0);
    Graph g;
    const Tensor& y = g.value(g.l2_normalize_axis(g.leaf(x), {0}));
    for (std::size_t c = 0; c < 4; ++c) {
      double sq = 0.0;
      for (std::size_t r = 0; r < 6; ++r) sq += y.at(r, c) * y.at(r, c);
      CHECK(std::fabs(std::sqrt(sq) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("mean_axis: degenerate axis, rows example and scalar-loop oracle") {
  Graph g;
  const Tensor& same = g.value(g.mean_axis(g.leaf(Tensor({1, 3}, {1, 2, 3})), 0));
  CHECK(same.shape() == Shape{3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(same[i] == doctest::Approx(1.0 + i));

  const Tensor& rows = g.value(g.mean_axis(g.leaf(Tensor({2, 2}, {1, 3, 5, 7})), 1));
  CHECK(rows[0] == 2.0);
  CHECK(rows[1] == 6.0);

  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({3, 4, 2}, rng);
  const Tensor& m = g.value(g.mean_axis(g.leaf(x), 1));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < 4; ++j) s += x[(i * 4 + j) * 2 + k];
      CHECK(m[i * 2 + k] == doctest::Approx(s / 4).epsilon(1e-14));
    }
  }
}

TEST_CASE("replicate_axis: copies content; mean over the new axis is the identity") {
  Graph g;
  Var x = g.leaf(Tensor({1}, {5}));
  const Tensor& rep = g.value(g.replicate_axis(x, 0, 2));
  CHECK(rep.shape() == Shape{2, 1});
  CHECK(rep[0] == 5.0);
  CHECK(rep[1] == 5.0);

  std::mt19937_64 rng(9);
  const Tensor t = random_tensor({3, 4}, rng);
  for (std::size_t axis = 0; axis <= 2; ++axis) {
    Graph g2;
    Var v = g2.leaf(t);
    const Tensor& back = g2.value(g2.mean_axis(g2.replicate_axis(v, axis, 5), axis));
    REQUIRE(back.same_shape(t));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);  // exact
  }
}

TEST_CASE("concat_axis: single part, rows, and mismatch errors") {
  Graph g;
  Var a = g.leaf(Tensor({1, 2}, {1, 2}));
  const Tensor& single = g.value(g.concat_axis({a}, 0));
  CHECK(single.shape() == Shape{1, 2});

  Var b = g.leaf(Tensor({1, 2}, {3, 4}));
  const Tensor& rows = g.value(g.concat_axis({a, b}, 0));
  CHECK(rows.shape() == Shape{2, 2});
  CHECK(rows.at(1, 0) == 3.0);

  CHECK_THROWS_AS(g.concat_axis({a, g.leaf(Tensor({1, 3}))}, 0), dimension_error);
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2a") {
  Graph g;
  Var a = g.leaf(Tensor({3}, {1, -2, 0.5}), true);
  g.backward(g.sum_all(a));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.grad(a)[i] == 1.0);

  Graph g2;
  Var b = g2.leaf(Tensor({3}, {1, -2, 0.5}), true);
  g2.backward(g2.sum_all(g2.hadamard(b, b)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g2.grad(b)[i] == 2.0 * g2.value(b)[i]);
}

TEST_CASE("backward: rejects a non-scalar loss") {
  Graph g;
  Var a = g.leaf(Tensor({3}), true);
  CHECK_THROWS_AS(g.backward(a), contract_error);
}

TEST_CASE("backward: a tensor feeding two consumers accumulates both gradients exactly") {
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor({4}, rng);
  const Tensor w1 = random_tensor({4}, rng);
  const Tensor w2 = random_tensor({4}, rng);

  auto single = [&](const Tensor& w) {
    Graph g;
    Var xv = g.leaf(x, true);
    g.backward(g.sum_all(g.hadamard(xv, g.leaf(w))));
    return g.grad(xv);
  };
  const Tensor g1 = single(w1);
  const Tensor g2 = single(w2);

  Graph g;
  Var xv = g.leaf(x, true);
  Var both = g.add(g.sum_all(g.hadamard(xv, g.leaf(w1))), g.sum_all(g.hadamard(xv, g.leaf(w2))));
  g.backward(both);
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.grad(xv)[i] == g1[i] + g2[i]);  // exact
}

TEST_CASE("backward: parameters outside the loss path keep zero gradients") {
  Parameter used("used", Tensor({2}, {1, 2}));
  Parameter unused("unused", Tensor({2}, {3, 4}));
  Graph g;
  Var u = g.param(used);
  g.param(unused);
  g.backward(g.sum_all(u));
  CHECK(used.grad[0] == 1.0);
  CHECK(unused.grad[0] == 0.0);
  CHECK(unused.grad[1] == 0.0);
}

TEST_CASE("finite_diff_check: linear and quadratic references") {
  auto sum_fn = [](Graph& g, Var x) { return g.sum_all(x); };
  CHECK(finite_diff_check(sum_fn, Tensor({3}, {1, 2, 3})) < 1e-8);  // round-off only

  auto sq_fn = [](Graph& g, Var x) { return g.sum_all(g.hadamard(x, x)); };
  const Tensor x({2}, {1, 2});
  Graph g;
  Var xv = g.leaf(x, true);
  g.backward(sq_fn(g, xv));
  CHECK(g.grad(xv)[0] == doctest::Approx(2.0));
  CHECK(g.grad(xv)[1] == doctest::Approx(4.0));
  CHECK(finite_diff_check(sq_fn, x) < 1e-9);
}

// Every differentiable op, checked at 10 random points against central
// differences through a random weighted-sum readout.
TEST_CASE("finite differences agree for the whole op set") {
  std::mt19937_64 rng(1234);

  struct OpCase {
    std::string name;
    Shape shape;
    double lo, hi;
    std::function<Var(Graph&, Var)> apply;
  };

  const Tensor fixed_mat = random_tensor({5, 3}, rng);
  const Tensor fixed_rhs = random_tensor({3, 4}, rng);
  const Tensor fixed_part = random_tensor({3, 4}, rng);

  std::vector<OpCase> cases;
  cases.push_back({"matmul_lhs", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.matmul(g.leaf(fixed_mat), x); }});
  cases.push_back({"matmul_rhs", {5, 3}, -1, 1,
                   [&](Graph& g, Var x) { return g.matmul(x, g.leaf(fixed_rhs)); }});
  cases.push_back({"add", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.add(x, g.leaf(fixed_part)); }});
  cases.push_back({"hadamard", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.hadamard(x, g.leaf(fixed_part)); }});
  cases.push_back({"scale_shift", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.scale_shift(x, -2.5, 0.75); }});
  cases.push_back({"tanh", {3, 4}, -2, 2, [&](Graph& g, Var x) { return g.tanh(x); }});
  cases.push_back({"sigmoid", {3, 4}, -2, 2, [&](Graph& g, Var x) { return g.sigmoid(x); }});
  cases.push_back({"softmax_axis0", {3, 4}, -2, 2,
                   [&](Graph& g, Var x) { return g.softmax_axis(x, 0); }});
  cases.push_back({"softmax_axis1", {3, 4}, -2, 2,
                   [&](Graph& g, Var x) { return g.softmax_axis(x, 1); }});
  cases.push_back({"l2_normalize_cols", {3, 4}, 0.2, 1.5,
                   [&](Graph& g, Var x) { return g.l2_normalize_axis(x, {0}); }});
  cases.push_back({"l2_normalize_all", {6}, 0.2, 1.5,
                   [&](Graph& g, Var x) { return g.l2_normalize_axis(x, {0}); }});
  cases.push_back({"abs_cbrt", {3, 4}, 0.3, 2.0, [&](Graph& g, Var x) { return g.abs_cbrt(x); }});
  cases.push_back({"mean_axis", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.mean_axis(x, 1); }});
  cases.push_back({"replicate_axis", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.replicate_axis(x, 1, 3); }});
  cases.push_back({"concat_axis", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.concat_axis({x, g.leaf(fixed_part)}, 1); }});
  cases.push_back({"select_axis", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.select_axis(x, 0, 1); }});
  cases.push_back({"transpose", {3, 4}, -1, 1, [&](Graph& g, Var x) { return g.transpose(x); }});
  cases.push_back({"reshape", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.reshape(x, {2, 6}); }});
  cases.push_back({"gather_columns", {3, 4}, -1, 1,
                   [&](Graph& g, Var x) { return g.gather_columns(x, {1, 3, 1}); }});
  cases.push_back({"dropout_mask", {3, 4}, -1, 1, [&](Graph& g, Var x) {
                     std::mt19937_64 mask_rng(99);
                     return g.dropout_mask(x, 0.4, mask_rng);
                   }});

  for (const OpCase& c : cases) {
    CAPTURE(c.name);
    for (int point = 0; point < 10; ++point) {
      const Tensor x = random_tensor(c.shape, rng, c.lo, c.hi);
      // readout weights are drawn once per point and then held fixed, so
      // every finite-difference evaluation sees the same scalar function
      Tensor w;
      auto f = [&](Graph& g, Var xv) {
        Var y = c.apply(g, xv);
        if (w.size() == 0) w = random_tensor(g.value(y).shape(), rng);
        return g.sum_all(g.hadamard(y, g.leaf(w)));
      };
      CHECK(finite_diff_check(f, x, 1e-6) < 1e-5);
    }
  }

  // scalar-output ops need no readout
  for (int point = 0; point < 10; ++point) {
    const Tensor x = random_tensor({7}, rng, -2, 2);
    auto ce = [](Graph& g, Var xv) { return g.cross_entropy_logits(xv, 3); };
    CHECK(finite_diff_check(ce, x, 1e-6) < 1e-5);
    auto sum = [](Graph& g, Var xv) { return g.sum_all(xv); };
    CHECK(finite_diff_check(sum, x, 1e-6) < 1e-5);
  }
}

TEST_CASE("gather_columns: duplicate ids sum their gradients") {
  Graph g;
  Parameter w("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var rows = g.gather_columns(g.param(w), {1, 1});
  const Tensor& v = g.value(rows);
  CHECK(v.at(0, 0) == v.at(1, 0));
  CHECK(v.at(0, 1) == v.at(1, 1));
  g.backward(g.sum_all(rows));
  CHECK(w.grad.at(0, 1) == 2.0);
  CHECK(w.grad.at(0, 0) == 0.0);
}
