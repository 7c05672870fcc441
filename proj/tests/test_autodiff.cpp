// Reverse-mode gradient tests. Wherever a closed-form Jacobian exists the
// tape's gradients are checked against it exactly; composites are checked
// against central finite differences on smooth paths.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "radar/ops.hpp"
#include "radar/rng.hpp"
#include "radar/tensor.hpp"

using namespace radar;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Central finite differences of a scalar-valued function of a flat vector.
std::vector<double> numeric_grad(const std::vector<double>& x0,
                                 const std::function<double(const std::vector<double>&)>& eval,
                                 double h = 1e-5) {
  std::vector<double> g(x0.size());
  std::vector<double> x = x0;
  for (size_t i = 0; i < x0.size(); ++i) {
    x[i] = x0[i] + h;
    const double fp = eval(x);
    x[i] = x0[i] - h;
    const double fm = eval(x);
    x[i] = x0[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want,
                 double rel = 5e-6, double abs_floor = 1e-8) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const double diff = std::abs(got[i] - want[i]);
    const double scale = std::max(std::abs(got[i]), std::abs(want[i]));
    INFO("coordinate ", i, ": got ", got[i], " want ", want[i]);
    CHECK(diff <= std::max(abs_floor, rel * scale));
  }
}

}  // namespace

TEST_CASE("sum: gradient is all ones; mean: all 1/N") {
  Tensor x = Tensor::full({2, 3}, 0.25).set_requires_grad(true);
  {
    Tape tape;
    backward(tape, sum(tape, x));
    CHECK(x.grad() == std::vector<double>(6, 1.0));
  }
  x.clear_grad();
  {
    Tape tape;
    backward(tape, mean(tape, x));
    CHECK(x.grad() == std::vector<double>(6, 1.0 / 6.0));
  }
}

TEST_CASE("scale: gradient is the constant factor") {
  Tensor x = Tensor::full({3}, 2.0).set_requires_grad(true);
  Tape tape;
  backward(tape, sum(tape, scale(tape, x, -3.5)));
  CHECK(x.grad() == std::vector<double>(3, -3.5));
}

TEST_CASE("fan-out accumulates: d sum(x + x) / dx = 2") {
  Tensor x = Tensor::full({4}, 0.5).set_requires_grad(true);
  Tape tape;
  backward(tape, sum(tape, add(tape, x, x)));
  CHECK(x.grad() == std::vector<double>(4, 2.0));
}

TEST_CASE("relu: exact subgradient with sign convention relu'(x<=0) = 0") {
  Tensor x({5}, {-1.0, -0.1, 0.0, 0.1, 1.0});
  x.set_requires_grad(true);
  Tape tape;
  backward(tape, sum(tape, relu(tape, x)));
  CHECK(x.grad() == std::vector<double>{0, 0, 0, 1, 1});
}

TEST_CASE("sigmoid: gradient is s(1-s) exactly") {
  Rng rng(3);
  Tensor x = random_tensor({6}, rng, -2.0, 2.0);
  x.set_requires_grad(true);
  Tape tape;
  Tensor s = sigmoid(tape, x);
  backward(tape, sum(tape, s));
  for (size_t i = 0; i < 6; ++i) {
    const double si = s.values()[i];
    CHECK(x.grad()[i] == si * (1.0 - si));
  }
}

TEST_CASE("weighted_sum: gradient equals the weights, zero weight exactly zero") {
  Tensor v = Tensor::full({4}, 3.0).set_requires_grad(true);
  Tape tape;
  backward(tape, weighted_sum(tape, v, {2.0, 0.0, -1.0, 0.5}));
  CHECK(v.grad()[0] == 2.0);
  CHECK(v.grad()[1] == 0.0);  // exact zero, the masking contract
  CHECK(v.grad()[2] == -1.0);
  CHECK(v.grad()[3] == 0.5);
}

TEST_CASE("matmul: gradients match dA = G B^T, dB = A^T G with G = ones") {
  Rng rng(7);
  const int m = 3, k = 4, n = 2;
  Tensor a = random_tensor({m, k}, rng);
  Tensor b = random_tensor({k, n}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tape tape;
  backward(tape, sum(tape, matmul(tape, a, b)));

  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double want = 0.0;  // sum_j B[p][j]
      for (int j = 0; j < n; ++j) want += b.values()[size_t(p) * n + j];
      CHECK(a.grad()[size_t(i) * k + p] == doctest::Approx(want).epsilon(1e-13));
    }
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j) {
      double want = 0.0;  // sum_i A[i][p]
      for (int i = 0; i < m; ++i) want += a.values()[size_t(i) * k + p];
      CHECK(b.grad()[size_t(p) * n + j] == doctest::Approx(want).epsilon(1e-13));
    }
}

TEST_CASE("mean_pool2: each input coordinate receives 1/4 of its window's gradient") {
  Tensor x = Tensor::full({1, 1, 4, 4}, 1.0).set_requires_grad(true);
  Tape tape;
  backward(tape, sum(tape, mean_pool2(tape, x)));
  CHECK(x.grad() == std::vector<double>(16, 0.25));
}

TEST_CASE("cross_entropy: gradient equals (softmax - onehot)/B exactly") {
  Rng rng(13);
  const int B = 3, K = 5;
  Tensor logits = random_tensor({B, K}, rng, -2.0, 2.0);
  logits.set_requires_grad(true);
  const std::vector<int> labels = {4, 0, 2};
  Tape tape;
  backward(tape, cross_entropy(tape, logits, labels));
  for (int i = 0; i < B; ++i) {
    double mx = -1e300, z = 0.0;
    for (int k = 0; k < K; ++k) mx = std::max(mx, logits.values()[size_t(i) * K + k]);
    for (int k = 0; k < K; ++k) z += std::exp(logits.values()[size_t(i) * K + k] - mx);
    for (int k = 0; k < K; ++k) {
      const double p = std::exp(logits.values()[size_t(i) * K + k] - mx) / z;
      const double want = (p - (k == labels[size_t(i)] ? 1.0 : 0.0)) / double(B);
      CHECK(logits.grad()[size_t(i) * K + k] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("binary_cross_entropy: gradient matches the analytic form away from the clamp") {
  Rng rng(17);
  const int B = 5;
  std::vector<double> p(B), t(B);
  for (int i = 0; i < B; ++i) {
    p[size_t(i)] = rng.uniform(0.1, 0.9);
    t[size_t(i)] = (i % 2 == 0) ? 1.0 : 0.0;
  }
  Tensor prob({B}, p);
  prob.set_requires_grad(true);
  Tape tape;
  backward(tape, binary_cross_entropy(tape, prob, t));
  for (int i = 0; i < B; ++i) {
    const double want = (-t[size_t(i)] / p[size_t(i)] +
                         (1.0 - t[size_t(i)]) / (1.0 - p[size_t(i)])) / double(B);
    CHECK(prob.grad()[size_t(i)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("dense composite: finite-difference gradcheck wrt every leaf") {
  Rng rng(19);
  Tensor x0 = random_tensor({2, 4}, rng);
  Tensor w0 = random_tensor({4, 3}, rng);
  Tensor b0 = random_tensor({3}, rng);
  const std::vector<int> labels = {2, 0};

  // Scalar loss as a function of one leaf's flat values.
  auto loss_with = [&](const std::vector<double>& xs, const std::vector<double>& ws,
                       const std::vector<double>& bs) {
    Tape tape;
    Tensor x({2, 4}, xs);
    Tensor w({4, 3}, ws);
    Tensor b({3}, bs);
    Tensor h = add_bias_rows(tape, matmul(tape, x, w), b);
    return cross_entropy(tape, h, labels).item();
  };

  Tensor x = x0.clone_values().set_requires_grad(true);
  Tensor w = w0.clone_values().set_requires_grad(true);
  Tensor b = b0.clone_values().set_requires_grad(true);
  Tape tape;
  Tensor h = add_bias_rows(tape, matmul(tape, x, w), b);
  backward(tape, cross_entropy(tape, h, labels));

  check_close(x.grad(), numeric_grad(x0.values(), [&](const std::vector<double>& v) {
    return loss_with(v, w0.values(), b0.values());
  }));
  check_close(w.grad(), numeric_grad(w0.values(), [&](const std::vector<double>& v) {
    return loss_with(x0.values(), v, b0.values());
  }));
  check_close(b.grad(), numeric_grad(b0.values(), [&](const std::vector<double>& v) {
    return loss_with(x0.values(), w0.values(), v);
  }));
}

TEST_CASE("conv composite: finite-difference gradcheck wrt input, kernel and bias") {
  Rng rng(29);
  Tensor x0 = random_tensor({1, 2, 4, 4}, rng, 0.0, 1.0);
  Tensor w0 = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
  Tensor c0 = random_tensor({3}, rng, -0.5, 0.5);

  auto loss_with = [&](const std::vector<double>& xs, const std::vector<double>& ws,
                       const std::vector<double>& cs) {
    Tape tape;
    Tensor x({1, 2, 4, 4}, xs);
    Tensor w({3, 2, 3, 3}, ws);
    Tensor c({3}, cs);
    Tensor h = sigmoid(tape, add_bias_channels(tape, conv2d(tape, x, w, 1, 1), c));
    return mean(tape, mean_pool2(tape, h)).item();
  };

  Tensor x = x0.clone_values().set_requires_grad(true);
  Tensor w = w0.clone_values().set_requires_grad(true);
  Tensor c = c0.clone_values().set_requires_grad(true);
  Tape tape;
  Tensor h = sigmoid(tape, add_bias_channels(tape, conv2d(tape, x, w, 1, 1), c));
  backward(tape, mean(tape, mean_pool2(tape, h)));

  check_close(x.grad(), numeric_grad(x0.values(), [&](const std::vector<double>& v) {
    return loss_with(v, w0.values(), c0.values());
  }));
  check_close(w.grad(), numeric_grad(w0.values(), [&](const std::vector<double>& v) {
    return loss_with(x0.values(), v, c0.values());
  }));
  check_close(c.grad(), numeric_grad(c0.values(), [&](const std::vector<double>& v) {
    return loss_with(x0.values(), w0.values(), v);
  }));
}

TEST_CASE("flatten routes gradients through unchanged") {
  Tensor x = Tensor::full({2, 1, 2, 2}, 1.0).set_requires_grad(true);
  Tape tape;
  Tensor f = flatten(tape, x);
  backward(tape, weighted_sum(tape, f, {1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(x.grad() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("gradients only reach leaves that require them") {
  Tensor a = Tensor::full({2}, 1.0).set_requires_grad(true);
  Tensor b = Tensor::full({2}, 2.0);  // frozen
  Tape tape;
  backward(tape, sum(tape, add(tape, a, b)));
  CHECK(a.has_grad());
  CHECK_FALSE(b.has_grad());
}

TEST_CASE("tape is single-use and validates its root") {
  Tensor x = Tensor::full({2}, 1.0).set_requires_grad(true);
  Tape tape;
  Tensor y = sum(tape, x);
  backward(tape, y);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(backward(tape, y), std::logic_error);             // second sweep
  CHECK_THROWS_AS(sum(tape, x), std::logic_error);                  // record after consume

  Tape t2;
  Tensor v = add(t2, x, x);
  CHECK_THROWS_AS(backward(t2, v), std::invalid_argument);          // non-scalar root

  Tape t3;
  Tensor s3 = sum(t3, x);
  Tape t4;
  Tensor s4 = sum(t4, x);
  CHECK_THROWS_AS(backward(t3, s4), std::invalid_argument);         // foreign root
}

TEST_CASE("non-finite gradients raise NonFiniteError naming the op") {
  // Forward stays finite (1e-300 * 1e200 * 1e200 = 1e100) but the backward
  // product of the two scale factors overflows.
  Tensor x = Tensor::full({1}, 1e-300).set_requires_grad(true);
  Tape tape;
  Tensor z = scale(tape, scale(tape, x, 1e200), 1e200);
  try {
    backward(tape, sum(tape, z));
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
}

TEST_CASE("gradients are bitwise deterministic across rebuilds") {
  auto run = [] {
    Rng rng(31);
    Tensor x = random_tensor({2, 3, 4, 4}, rng, 0.0, 1.0);
    Tensor w = random_tensor({2, 3, 3, 3}, rng, -0.5, 0.5);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    Tape tape;
    Tensor h = sigmoid(tape, conv2d(tape, x, w, 1, 1));
    backward(tape, mean(tape, h));
    return std::make_pair(x.grad(), w.grad());
  };
  const auto [gx1, gw1] = run();
  const auto [gx2, gw2] = run();
  CHECK(gx1 == gx2);
  CHECK(gw1 == gw2);
}
