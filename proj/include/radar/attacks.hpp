#pragma once

// L-infinity evasion attacks on a classifier f, optionally fighting a
// detector g: plain PGD, selective PGD (per-item indicator-masked joint
// objective), and orthogonal PGD (per-item gradient deflection so the step
// is first-order neutral for whichever model is currently satisfied).
//
// All attacks ascend their stated objective with sign steps of size alpha,
// projected onto the L-inf ball of radius epsilon around the original image
// intersected with the [0,1] box. Models must be in eval mode: attacks need
// input gradients but must never accumulate parameter gradients.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "radar/nets.hpp"
#include "radar/tensor.hpp"

namespace radar {

inline constexpr double kDetectorThreshold = 0.5;

enum class AttackKind { pgd, spgd, opgd };

std::string attack_kind_name(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  double epsilon = 16.0 / 255.0;
  double alpha = 0.03;
  int iters = 100;

  void validate() const;  // 0 <= epsilon <= 1, alpha > 0, iters >= 0
};

// One per-item trajectory record. loss_ce is the raw cross-entropy of the
// classifier against the true label; loss_bce is the detector's
// benign-target binary cross-entropy -log(1 - p), the quantity a successful
// evasion drives to zero (absent for plain PGD). active_case tells which
// objectives still drive this item at that iterate: bit 1 = classifier,
// bit 2 = detector, 0 = item finished.
struct TrajectoryRow {
  int image_id = 0;
  int iteration = 0;
  double loss_ce = 0.0;
  std::optional<double> loss_bce;
  int active_case = 0;
};

struct AttackResult {
  Tensor x_adv;
  std::vector<char> classifier_fooled;  // per item: argmax f(x_adv) != y
  std::vector<char> detector_evaded;    // per item: g(x_adv) < threshold (empty without g)
  std::vector<TrajectoryRow> trajectory;
  double orth_violation_max = 0.0;  // opgd: worst relative |<step_dir, protected_grad>|
};

// One ascent step: x_cur + alpha * sign(grad), clipped to x_orig +- epsilon,
// then to [0,1]. sign(0) = 0, so zero-gradient coordinates do not move.
Tensor linf_step_project(const Tensor& x_cur, const Tensor& grad, const Tensor& x_orig,
                         double alpha, double epsilon);

double dot(const std::vector<double>& a, const std::vector<double>& b);

// u minus its projection onto v; returns u unchanged when ||v|| < 1e-12.
std::vector<double> orth_component(const std::vector<double>& u, const std::vector<double>& v);

AttackResult pgd_attack(const Model& f, const Tensor& x, const std::vector<int>& y,
                        const AttackConfig& cfg, bool record_trajectory = false,
                        const std::vector<int>* image_ids = nullptr);

AttackResult spgd_attack(const Model& f, const Model& g, const Tensor& x,
                         const std::vector<int>& y, const AttackConfig& cfg,
                         bool record_trajectory = false,
                         const std::vector<int>* image_ids = nullptr);

AttackResult opgd_attack(const Model& f, const Model& g, const Tensor& x,
                         const std::vector<int>& y, const AttackConfig& cfg,
                         bool record_trajectory = false,
                         const std::vector<int>* image_ids = nullptr);

// Dispatch on cfg.kind. g may be null for pgd (when present it is used to
// fill detector_evaded); spgd and opgd require it.
AttackResult run_attack(const Model& f, const Model* g, const Tensor& x,
                        const std::vector<int>& y, const AttackConfig& cfg,
                        bool record_trajectory = false,
                        const std::vector<int>* image_ids = nullptr);

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);

}  // namespace radar
