// Attack tests. Tiny linear models (flatten + head) make gradients, and
// therefore whole attack steps, analytically predictable: PGD steps can be
// checked bitwise, selectivity masks show up as exactly-unmoved rows, and
// orthogonalized steps can be verified against the raw definition.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "radar/attacks.hpp"
#include "radar/io_util.hpp"
#include "radar/nets.hpp"
#include "radar/rng.hpp"

using namespace radar;

namespace {

constexpr int kItem = 4;  // 1x2x2 images

ArchConfig lin_cfg() {
  ArchConfig cfg;
  cfg.arch = "cnn-small";  // informational only; layers are explicit
  cfg.in_channels = 1;
  cfg.height = 2;
  cfg.width = 2;
  cfg.num_classes = 2;
  return cfg;
}

// logits = x_flat . W + b, W is [4,2] row-major.
Model linear_classifier(const std::vector<double>& w, const std::vector<double>& b) {
  std::vector<LayerSpec> layers = {LayerSpec::flatten(), LayerSpec::head(2, false)};
  Model m = Model::from_parts(layers, lin_cfg(), false,
                              {{"layer1.weight", Tensor({kItem, 2}, w)},
                               {"layer1.bias", Tensor({2}, b)}});
  m.set_mode(Mode::eval);
  return m;
}

// p = sigmoid(x_flat . w + b).
Model linear_detector(const std::vector<double>& w, double b) {
  std::vector<LayerSpec> layers = {LayerSpec::flatten(), LayerSpec::head(1, true)};
  Model m = Model::from_parts(layers, lin_cfg(), true,
                              {{"layer1.weight", Tensor({kItem, 1}, w)},
                               {"layer1.bias", Tensor({1}, {b})}});
  m.set_mode(Mode::eval);
  return m;
}

// Predicts class 0 whenever pixels are positive.
Model default_classifier() {
  return linear_classifier({1, -1, 1, -1, 1, -1, 1, -1}, {0, 0});
}

Tensor half_batch(int b) { return Tensor::full({b, 1, 2, 2}, 0.5); }

AttackConfig cfg_of(AttackKind kind, double eps, double alpha, int iters) {
  AttackConfig c;
  c.kind = kind;
  c.epsilon = eps;
  c.alpha = alpha;
  c.iters = iters;
  return c;
}

double linf(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("linf_step_project: hand arithmetic") {
  const Tensor x0 = half_batch(1);

  // A unit step from 0.5 is cut back to the epsilon ball: 0.5 + 16/255.
  Tensor up = linf_step_project(x0, Tensor::full(x0.shape(), 3.0), x0, 1.0, 16.0 / 255.0);
  for (double v : up.values()) CHECK(v == 0.5 + 16.0 / 255.0);

  // Descent direction mirrors it.
  Tensor dn = linf_step_project(x0, Tensor::full(x0.shape(), -0.2), x0, 1.0, 16.0 / 255.0);
  for (double v : dn.values()) CHECK(v == 0.5 - 16.0 / 255.0);

  // sign(0) = 0: a zero gradient moves nothing.
  Tensor still = linf_step_project(x0, Tensor::zeros(x0.shape()), x0, 1.0, 16.0 / 255.0);
  CHECK(still.values() == x0.values());

  // Small alpha not hitting the ball: plain +- alpha.
  Tensor small = linf_step_project(x0, Tensor::full(x0.shape(), 1.0), x0, 0.01, 0.5);
  for (double v : small.values()) CHECK(v == 0.5 + 0.01);

  // The [0,1] box binds before the ball does.
  Tensor hi = Tensor::full({1, 1, 2, 2}, 0.99);
  Tensor clipped = linf_step_project(hi, Tensor::full(hi.shape(), 1.0), hi, 1.0, 0.5);
  for (double v : clipped.values()) CHECK(v == 1.0);
  Tensor lo = Tensor::full({1, 1, 2, 2}, 0.01);
  Tensor floored = linf_step_project(lo, Tensor::full(lo.shape(), -1.0), lo, 1.0, 0.5);
  for (double v : floored.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(linf_step_project(x0, Tensor::zeros({1, 1, 1, 4}), x0, 0.1, 0.1),
                  std::invalid_argument);
}

TEST_CASE("linf_step_project: epsilon 0 pins the iterate to the original") {
  const Tensor x0 = half_batch(2);
  Tensor moved = linf_step_project(x0, Tensor::full(x0.shape(), 5.0), x0, 10.0, 0.0);
  CHECK(moved.values() == x0.values());
}

TEST_CASE("linf_step_project: randomized feasibility, including chained steps") {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const double eps = rng.uniform(0.0, 0.3);
    const double alpha = rng.uniform(1e-3, 0.5);
    std::vector<double> orig(8);
    for (double& v : orig) v = rng.uniform();
    const Tensor x0({2, 1, 2, 2}, orig);
    Tensor cur = x0;
    for (int step = 0; step < 4; ++step) {
      std::vector<double> g(8);
      for (double& v : g) v = rng.uniform(-1.0, 1.0);
      cur = linf_step_project(cur, Tensor({2, 1, 2, 2}, g), x0, alpha, eps);
      CHECK(linf(cur.values(), orig) <= eps + 1e-9);
      for (double v : cur.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("dot and orth_component") {
  CHECK(dot({1, 2, 3}, {4, 5, 6}) == 32.0);
  CHECK_THROWS_AS(dot({1}, {1, 2}), std::invalid_argument);

  // Classic plane case: removing the x-component of (1,1) leaves (0,1).
  const std::vector<double> r = orth_component({1, 1}, {1, 0});
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 1.0);

  // Parallel vectors orthogonalize to (numerically) nothing.
  const std::vector<double> z = orth_component({2, 4}, {1, 2});
  CHECK(std::abs(z[0]) < 1e-15);
  CHECK(std::abs(z[1]) < 1e-15);

  // Degenerate v below the norm floor: u comes back unchanged.
  const std::vector<double> u = {0.3, -0.7};
  CHECK(orth_component(u, {1e-13, 0.0}) == u);

  CHECK_THROWS_AS(orth_component({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("orth_component: random high-dimensional instances are orthogonal") {
  Rng rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(1000), v(1000);
    for (double& x : u) x = rng.uniform(-1.0, 1.0);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const std::vector<double> r = orth_component(u, v);
    const double nr = std::sqrt(dot(r, r));
    const double nv = std::sqrt(dot(v, v));
    REQUIRE(nr > 0.0);
    CHECK(std::abs(dot(r, v)) <= 1e-9 * nr * nv);
  }
}

TEST_CASE("attack config validation and kind parsing") {
  CHECK(parse_attack_kind("pgd") == AttackKind::pgd);
  CHECK(parse_attack_kind("spgd") == AttackKind::spgd);
  CHECK(parse_attack_kind("opgd") == AttackKind::opgd);
  CHECK_THROWS_AS(parse_attack_kind("fgsm"), std::invalid_argument);
  CHECK(attack_kind_name(AttackKind::spgd) == "spgd");

  AttackConfig c;
  c.epsilon = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.iters = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  AttackConfig ok;
  ok.epsilon = 0.0;
  ok.iters = 0;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("attacks demand eval mode and valid inputs") {
  Model f = default_classifier();
  Model g = linear_detector({1, 1, 1, 1}, 0.0);
  const Tensor x = half_batch(1);
  const std::vector<int> y = {0};
  const AttackConfig cfg = cfg_of(AttackKind::pgd, 0.1, 0.03, 2);

  f.set_mode(Mode::train);
  CHECK_THROWS_AS(pgd_attack(f, x, y, cfg), std::logic_error);
  f.set_mode(Mode::eval);

  g.set_mode(Mode::train);
  CHECK_THROWS_AS(spgd_attack(f, g, x, y, cfg_of(AttackKind::spgd, 0.1, 0.03, 2)),
                  std::logic_error);
  g.set_mode(Mode::eval);

  // Roles are enforced.
  CHECK_THROWS_AS(pgd_attack(g, x, {0}, cfg), std::invalid_argument);

  // Pixels must sit in [0,1]; labels in range; ids must match the batch.
  CHECK_THROWS_AS(pgd_attack(f, Tensor::full({1, 1, 2, 2}, 1.5), y, cfg), std::invalid_argument);
  CHECK_THROWS_AS(pgd_attack(f, x, {2}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(pgd_attack(f, x, {-1}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(pgd_attack(f, x, {0, 1}, cfg), std::invalid_argument);
  const std::vector<int> ids = {1, 2};
  CHECK_THROWS_AS(pgd_attack(f, x, y, cfg, true, &ids), std::invalid_argument);

  // The dispatcher requires the detector for the adaptive attacks.
  CHECK_THROWS_AS(run_attack(f, nullptr, x, y, cfg_of(AttackKind::spgd, 0.1, 0.03, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_attack(f, nullptr, x, y, cfg_of(AttackKind::opgd, 0.1, 0.03, 1)),
                  std::invalid_argument);
}

TEST_CASE("pgd: one step on a linear softmax model matches the closed form") {
  const std::vector<double> W = {1, -1, 2, 0, -3, 1, 0.5, 2};
  const std::vector<double> b = {0.1, -0.2};
  Model f = linear_classifier(W, b);
  const Tensor x = half_batch(1);
  const int y = 0;
  const double alpha = 0.04, eps = 0.2;

  // Closed form: grad_x CE = W (p - e_y) with p = softmax(x.W + b).
  double l0 = 0.1, l1 = -0.2;
  for (int j = 0; j < kItem; ++j) {
    l0 += 0.5 * W[size_t(j) * 2];
    l1 += 0.5 * W[size_t(j) * 2 + 1];
  }
  const double mx = std::max(l0, l1);
  const double z = std::exp(l0 - mx) + std::exp(l1 - mx);
  const double p0 = std::exp(l0 - mx) / z, p1 = std::exp(l1 - mx) / z;
  std::vector<double> want(kItem);
  for (int j = 0; j < kItem; ++j) {
    const double gj = (p0 - 1.0) * W[size_t(j) * 2] + p1 * W[size_t(j) * 2 + 1];
    const double s = gj > 0.0 ? 1.0 : (gj < 0.0 ? -1.0 : 0.0);
    want[size_t(j)] = std::min(std::max(0.5 + alpha * s, 0.5 - eps), 0.5 + eps);
    want[size_t(j)] = std::min(std::max(want[size_t(j)], 0.0), 1.0);
  }

  const AttackResult res = pgd_attack(f, x, {y}, cfg_of(AttackKind::pgd, eps, alpha, 1));
  CHECK(res.x_adv.values() == want);
  CHECK(res.orth_violation_max == 0.0);
}

TEST_CASE("pgd: iterates monotonically increase a convex loss") {
  Model f = linear_classifier({1, -1, 2, 0, -3, 1, 0.5, 2}, {0, 0});
  const Tensor x = half_batch(2);
  const AttackResult res =
      pgd_attack(f, x, {0, 1}, cfg_of(AttackKind::pgd, 0.3, 0.02, 6), true);

  // Collect each item's loss path (rows are interleaved item-major per iter).
  for (int item = 0; item < 2; ++item) {
    std::vector<double> path;
    for (const TrajectoryRow& r : res.trajectory)
      if (r.image_id == item) path.push_back(r.loss_ce);
    REQUIRE(path.size() == 7);  // iterates 0..5 plus the final point
    for (size_t t = 1; t < path.size(); ++t) CHECK(path[t] >= path[t - 1] - 1e-12);
  }
}

TEST_CASE("pgd: trajectory layout, ids, and empty loss_bce") {
  Model f = default_classifier();
  const std::vector<int> ids = {7, 9};
  const AttackResult res = pgd_attack(f, half_batch(2), {0, 0},
                                      cfg_of(AttackKind::pgd, 0.1, 0.05, 3), true, &ids);
  REQUIRE(res.trajectory.size() == 2 * (3 + 1));
  for (size_t k = 0; k < res.trajectory.size(); ++k) {
    const TrajectoryRow& r = res.trajectory[k];
    CHECK(r.image_id == ids[k % 2]);
    CHECK(r.iteration == int(k / 2));
    CHECK_FALSE(r.loss_bce.has_value());
    CHECK(r.active_case == 1);
    CHECK(std::isfinite(r.loss_ce));
  }

  // Without ids, items are numbered 0..B-1; with zero iterations the attack
  // returns the input and still reports the final evaluation row.
  const AttackResult zero = pgd_attack(f, half_batch(2), {0, 0},
                                       cfg_of(AttackKind::pgd, 0.1, 0.05, 0), true);
  CHECK(zero.x_adv.values() == half_batch(2).values());
  REQUIRE(zero.trajectory.size() == 2);
  CHECK(zero.trajectory[0].image_id == 0);
  CHECK(zero.trajectory[1].image_id == 1);
  CHECK(zero.trajectory[0].iteration == 0);
  CHECK(zero.detector_evaded.empty());
}

TEST_CASE("pgd: feasibility and success flags on the linear model") {
  // Class-1 bias puts the decision boundary at mean pixel 0.125, inside the
  // budget box: ascent drags the 0.5 pixels down to 0.1 and flips the label.
  Model f = linear_classifier({1, -1, 1, -1, 1, -1, 1, -1}, {0, 1});
  const Tensor x = half_batch(3);
  const AttackConfig cfg = cfg_of(AttackKind::pgd, 0.4, 0.05, 25);
  const AttackResult res = pgd_attack(f, x, {0, 0, 0}, cfg);
  CHECK(linf(res.x_adv.values(), x.values()) <= cfg.epsilon + 1e-9);
  for (char fooled : res.classifier_fooled) CHECK(fooled == 1);
  // A zero budget cannot fool it.
  const AttackResult none = pgd_attack(f, x, {0, 0, 0}, cfg_of(AttackKind::pgd, 0.0, 0.05, 25));
  CHECK(none.x_adv.values() == x.values());
  for (char fooled : none.classifier_fooled) CHECK(fooled == 0);
}

TEST_CASE("pgd: epsilon monotonicity on the linear model") {
  Model f = default_classifier();
  const Tensor x = half_batch(1);
  double prev = -1.0;
  for (double eps : {0.02, 0.05, 0.1, 0.2}) {
    const AttackResult res = pgd_attack(f, x, {0}, cfg_of(AttackKind::pgd, eps, 0.03, 10));
    const double delta = linf(res.x_adv.values(), x.values());
    CHECK(delta == doctest::Approx(std::min(0.03 * 10, eps)).epsilon(1e-12));
    CHECK(delta >= prev);
    prev = delta;
  }
}

TEST_CASE("run_attack: pgd fills detector_evaded when a detector is supplied") {
  Model f = default_classifier();
  Model g_evaded = linear_detector({0, 0, 0, 0}, -2.0);   // always below threshold
  Model g_flagged = linear_detector({0, 0, 0, 0}, 2.0);   // always above
  const Tensor x = half_batch(2);
  const AttackConfig cfg = cfg_of(AttackKind::pgd, 0.1, 0.03, 3);

  const AttackResult r1 = run_attack(f, &g_evaded, x, {0, 0}, cfg);
  REQUIRE(r1.detector_evaded.size() == 2);
  CHECK(r1.detector_evaded[0] == 1);
  CHECK(r1.detector_evaded[1] == 1);

  const AttackResult r2 = run_attack(f, &g_flagged, x, {0, 0}, cfg);
  CHECK(r2.detector_evaded[0] == 0);
  CHECK(r2.detector_evaded[1] == 0);
}

TEST_CASE("spgd: with the detector already evaded, the first step equals pgd") {
  // Items start correctly classified (logit0 = 2, logit1 = 1 at x = 0.5), so
  // the classifier weight is 1 for every item; the detector sits well under
  // threshold, so its weight is exactly 0 and only scale separates the
  // objectives from plain pgd — which the sign step erases.
  Model f = linear_classifier({1, -1, 2, 0, -3, 1, 4, 2}, {0, 0});
  Model g = linear_detector({0.5, -0.25, 0.125, 1.0}, -3.0);  // p well under 0.5
  const Tensor x = half_batch(2);
  const std::vector<int> y = {0, 0};

  const AttackResult via_spgd =
      spgd_attack(f, g, x, y, cfg_of(AttackKind::spgd, 0.2, 0.05, 1));
  const AttackResult via_pgd = pgd_attack(f, x, y, cfg_of(AttackKind::pgd, 0.2, 0.05, 1));
  CHECK(via_spgd.x_adv.values() == via_pgd.x_adv.values());  // bitwise
}

TEST_CASE("spgd: items with both objectives met never move and stop the attack") {
  // y deliberately mislabeled (classifier already "fooled") and the detector
  // sits below threshold: nothing is active, so the input comes back bitwise
  // and the trajectory shows one all-zero row per item.
  Model f = default_classifier();           // predicts 0 on positive pixels
  Model g = linear_detector({0, 0, 0, 0}, -2.0);
  const Tensor x = half_batch(2);
  const AttackResult res = spgd_attack(f, g, x, {1, 1},
                                       cfg_of(AttackKind::spgd, 0.2, 0.05, 50), true);
  CHECK(res.x_adv.values() == x.values());
  REQUIRE(res.trajectory.size() == 2);
  for (const TrajectoryRow& r : res.trajectory) {
    CHECK(r.iteration == 0);
    CHECK(r.active_case == 0);
    REQUIRE(r.loss_bce.has_value());
    // Benign-framed BCE of an evading detector is small: -log(1 - 0.119...).
    CHECK(*r.loss_bce == doctest::Approx(-std::log(1.0 - 1.0 / (1.0 + std::exp(2.0))))
                             .epsilon(1e-12));
  }
  CHECK(res.classifier_fooled == std::vector<char>{1, 1});
  CHECK(res.detector_evaded == std::vector<char>{1, 1});
}

TEST_CASE("spgd: per-item masking moves only the active rows") {
  // Item 0 is still classified correctly (active); item 1 is labeled as the
  // other class and the detector ignores everything (inactive).
  Model f = default_classifier();
  Model g = linear_detector({0, 0, 0, 0}, -2.0);
  const Tensor x = half_batch(2);
  const AttackResult res = spgd_attack(f, g, x, {0, 1},
                                       cfg_of(AttackKind::spgd, 0.2, 0.05, 1), true);
  const std::vector<double>& adv = res.x_adv.values();
  const std::vector<double>& orig = x.values();
  // Item 1's pixels are bitwise untouched.
  for (int j = 0; j < kItem; ++j) CHECK(adv[size_t(kItem + j)] == orig[size_t(kItem + j)]);
  // Item 0 moved by exactly alpha somewhere.
  double moved = 0.0;
  for (int j = 0; j < kItem; ++j) moved = std::max(moved, std::abs(adv[size_t(j)] - orig[size_t(j)]));
  CHECK(moved == doctest::Approx(0.05).epsilon(1e-12));

  // Trajectory active bits: item 0 classifier-only (1), item 1 idle (0).
  REQUIRE(res.trajectory.size() >= 2);
  CHECK(res.trajectory[0].active_case == 1);
  CHECK(res.trajectory[1].active_case == 0);
}

TEST_CASE("spgd: active case reports both objectives when both still bind") {
  Model f = default_classifier();
  Model g = linear_detector({0, 0, 0, 0}, 2.0);  // flags everything
  const AttackResult res = spgd_attack(f, g, half_batch(1), {0},
                                       cfg_of(AttackKind::spgd, 0.1, 0.03, 1), true);
  REQUIRE(!res.trajectory.empty());
  CHECK(res.trajectory[0].active_case == 3);  // classifier bit | detector bit
}

TEST_CASE("opgd: items with both objectives met come back untouched") {
  Model f = default_classifier();
  Model g = linear_detector({0, 0, 0, 0}, -2.0);
  const Tensor x = half_batch(2);
  const AttackResult res = opgd_attack(f, g, x, {1, 1},
                                       cfg_of(AttackKind::opgd, 0.2, 0.05, 50), true);
  CHECK(res.x_adv.values() == x.values());
  REQUIRE(res.trajectory.size() == 2);
  CHECK(res.trajectory[0].active_case == 0);
  CHECK(res.trajectory[1].active_case == 0);
  CHECK(res.orth_violation_max == 0.0);
}

TEST_CASE("opgd: the step direction is orthogonal to the protected gradient") {
  // Distinct non-parallel linear models so both gradients are fixed vectors.
  Model f = linear_classifier({1, -1, 2, 0, -3, 1, 0.5, 2}, {0.1, -0.1});
  Model g = linear_detector({0.8, -0.3, 0.4, 1.2}, 0.5);
  const Tensor x = half_batch(2);
  const AttackResult res = opgd_attack(f, g, x, {0, 0},
                                       cfg_of(AttackKind::opgd, 0.25, 0.03, 8), true);
  CHECK(res.orth_violation_max <= 1e-9);
  CHECK(linf(res.x_adv.values(), x.values()) <= 0.25 + 1e-9);
}

TEST_CASE("opgd: branch selection shows up in active_case") {
  // Still-correct classifier dominates: case 1.
  Model f = default_classifier();
  Model g = linear_detector({0.3, -0.2, 0.25, 0.15}, 1.0);  // flags the batch
  const AttackResult r1 = opgd_attack(f, g, half_batch(1), {0},
                                      cfg_of(AttackKind::opgd, 0.2, 0.03, 1), true);
  REQUIRE(!r1.trajectory.empty());
  CHECK(r1.trajectory[0].active_case == 1);

  // Classifier already fooled, detector still flags: case 2.
  const AttackResult r2 = opgd_attack(f, g, half_batch(1), {1},
                                      cfg_of(AttackKind::opgd, 0.2, 0.03, 1), true);
  REQUIRE(!r2.trajectory.empty());
  CHECK(r2.trajectory[0].active_case == 2);
}

TEST_CASE("adaptive attacks but not pgd report the benign-framed detector loss") {
  Model f = default_classifier();
  Model g = linear_detector({0.1, 0.2, -0.1, 0.3}, 0.4);
  const Tensor x = half_batch(1);
  for (AttackKind kind : {AttackKind::spgd, AttackKind::opgd}) {
    const AttackResult res = run_attack(f, &g, x, {0}, cfg_of(kind, 0.1, 0.03, 2), true);
    REQUIRE(!res.trajectory.empty());
    for (const TrajectoryRow& r : res.trajectory) {
      REQUIRE(r.loss_bce.has_value());
      CHECK(*r.loss_bce >= 0.0);
      CHECK(std::isfinite(*r.loss_bce));
    }
  }
}

TEST_CASE("attacks are bitwise deterministic") {
  Model f = linear_classifier({1, -1, 2, 0, -3, 1, 0.5, 2}, {0, 0});
  Model g = linear_detector({0.8, -0.3, 0.4, 1.2}, 0.5);
  const Tensor x = half_batch(3);
  const std::vector<int> y = {0, 1, 0};
  for (AttackKind kind : {AttackKind::pgd, AttackKind::spgd, AttackKind::opgd}) {
    const AttackConfig cfg = cfg_of(kind, 0.15, 0.04, 6);
    const AttackResult a = run_attack(f, &g, x, y, cfg, true);
    const AttackResult b = run_attack(f, &g, x, y, cfg, true);
    CHECK(a.x_adv.values() == b.x_adv.values());
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (size_t i = 0; i < a.trajectory.size(); ++i) {
      CHECK(a.trajectory[i].loss_ce == b.trajectory[i].loss_ce);
      CHECK(a.trajectory[i].active_case == b.trajectory[i].active_case);
    }
  }
}

TEST_CASE("write_trajectory_csv: golden output including the empty bce column") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "radar_attacks_test";
  fs::create_directories(dir);
  const std::string path = (dir / "traj.csv").string();

  std::vector<TrajectoryRow> rows;
  rows.push_back({3, 0, 1.5, std::nullopt, 1});
  rows.push_back({3, 1, 0.25, 2.0, 3});
  write_trajectory_csv(path, rows);
  CHECK(read_text_file(path) ==
        "image_id,iteration,loss_ce,loss_bce,active_case\n"
        "3,0,1.5,,1\n"
        "3,1,0.25,2,3\n");
}
