#pragma once

// Training loops: Adam updates with cosine or plateau learning-rate
// schedules. Three phases share the machinery:
//   - train_clean: the classifier f on clean images (cross-entropy);
//   - train_detector_initial: the detector g on mixed batches of clean
//     images and PGD examples crafted against the frozen classifier;
//   - radar_finetune: adversarial finetuning of g, where every batch's
//     adversarials are crafted by an adaptive attack (spgd/opgd) against
//     the *current* detector before the optimizer step.
// The classifier is never modified by the detector phases.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "radar/attacks.hpp"
#include "radar/data.hpp"
#include "radar/nets.hpp"
#include "radar/tensor.hpp"

namespace radar {

// Non-finite training loss, reported with phase/epoch/batch context.
struct TrainDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Schedule { none, cosine, plateau };
std::string schedule_name(Schedule s);
Schedule parse_schedule(const std::string& s);

struct TrainConfig {
  int epochs = 20;
  int batch = 32;
  double lr = 1e-3;
  Schedule schedule = Schedule::cosine;
  int t_max = 10;              // cosine half-period, in epochs
  int patience = 3;            // plateau: epochs without val-loss improvement
  double factor = 0.1;         // plateau: lr multiplier on trigger
  int val_attack_items = 64;   // held-out items attacked for detector validation
  uint64_t seed = 0;

  void validate() const;
};

struct TrainLogRow {
  int epoch = 0;
  std::string split;   // "train" or "val"
  std::string metric;  // "loss", "accuracy", "auc", "lr"
  double value = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  void add(int epoch, std::string split, std::string metric, double value);
  // Most recent value for (split, metric); throws when absent.
  double last(const std::string& split, const std::string& metric) const;
};

std::string train_log_csv(const TrainLog& log);

// Adaptive-moment estimation with the customary decay constants
// (0.9, 0.999, eps 1e-8) and bias correction. Parameters without an
// accumulated gradient are treated as having gradient zero.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr);
  double lr() const { return lr_; }
  void set_lr(double lr);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_;
  int64_t t_ = 0;
};

// Minimizes cross-entropy of f on train, validating each epoch; f ends in
// eval mode. Deterministic given cfg.seed.
TrainLog train_clean(Model& f, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

// Detector bootstrap: every batch is half clean, half PGD examples crafted
// against f_frozen (craft.kind is ignored; this phase always crafts plain
// PGD). f_frozen must already be in eval mode and is never updated.
// Validation runs on a fixed attacked subset of val built once up front.
TrainLog train_detector_initial(Model& g, const Model& f_frozen, const Dataset& train,
                                const Dataset& val, const TrainConfig& cfg,
                                const AttackConfig& craft);

// Adversarial finetuning: per batch, g flips to eval mode, craft.kind
// (spgd or opgd) crafts adversarials against the current g, then g trains
// on the mixed 2B batch. Always drives the learning rate with the plateau
// schedule on validation loss, measured on a fixed attacked subset of val
// crafted once against the incoming detector.
TrainLog radar_finetune(Model& g, const Model& f_frozen, const Dataset& train,
                        const Dataset& val, const TrainConfig& cfg, const AttackConfig& craft);

}  // namespace radar
