#pragma once

// Config-driven experiment runner: a flat-sectioned key=value config format
// with line/key diagnostics, plus the five subcommand implementations and
// the shared model-evaluation routine. One seed in the config drives the
// dataset, parameter init, shuffling, and every attack, so reruns are
// bitwise-reproducible.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "radar/attacks.hpp"
#include "radar/data.hpp"
#include "radar/metrics.hpp"
#include "radar/nets.hpp"
#include "radar/train.hpp"

namespace radar {

// Malformed config: unknown section/key, bad value, missing seed. The
// message carries the config origin and line number where applicable.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetSection {
  std::string kind = "synth";  // "synth" or "cifar10"
  std::string path;            // cifar10: directory with .bin batches
  double train_fraction = 0.7;
  SynthConfig synth;           // seed is filled from the master seed at build time
};

struct ModelSection {
  std::string classifier_arch = "cnn-small";
  std::string detector_arch = "cnn-small";
};

struct TrainSection {
  TrainConfig base;
  // Per-phase overrides; negative means "use base".
  int classifier_epochs = -1;
  int detector_epochs = -1;
  int finetune_epochs = -1;
  double classifier_lr = -1.0;
  double detector_lr = -1.0;
  double finetune_lr = -1.0;
};

struct EvalSection {
  std::vector<AttackKind> attacks = {AttackKind::pgd, AttackKind::spgd, AttackKind::opgd};
  double n_percent = 5.0;
  int items = 128;        // evaluation subset size
  int attack_items = 20;  // cmd_attack batch size (trajectory source)
  std::string detector_checkpoint;  // relative to out_dir unless absolute
  std::string tag = "eval";
};

struct ExperimentConfig {
  uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir = "out";
  DatasetSection dataset;
  ModelSection model;
  TrainSection train;
  AttackConfig attack_craft;  // in-training crafting budget
  AttackConfig attack_eval;   // full evaluation budget
  EvalSection eval;

  ExperimentConfig();
};

// origin appears in error messages ("file.ini line 12: ...").
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

// Assembled helpers shared by commands and tests.
Dataset build_dataset(const ExperimentConfig& cfg);
ArchConfig make_arch(const ExperimentConfig& cfg, const std::string& arch_name);
TrainConfig phase_train_config(const ExperimentConfig& cfg, const std::string& phase);
std::string output_path(const ExperimentConfig& cfg, const std::string& name);

// Runs every requested attack kind against (f, g) on a seeded subset of
// `data` and assembles the report. Both models must be in eval mode.
EvalReport evaluate_models(const Model& f, const Model& g, const Dataset& data,
                           const AttackConfig& base_attack,
                           const std::vector<AttackKind>& kinds, double n_percent, int items,
                           uint64_t seed, const std::string& tag);

// Subcommands. Outputs land under cfg.out_dir with fixed names:
//   train-classifier: classifier.ckpt, train_classifier.csv
//   train-detector:   detector.ckpt, train_detector.csv
//   finetune-radar:   detector_radar.ckpt, train_finetune.csv
//   attack:           attack_<kind>.bin, attack_<kind>_summary.csv,
//                     trajectory_<kind>.csv
//   evaluate:         eval_<tag>.csv, eval_<tag>.txt
void cmd_train_classifier(const ExperimentConfig& cfg);
void cmd_train_detector(const ExperimentConfig& cfg);
void cmd_finetune_radar(const ExperimentConfig& cfg);
void cmd_attack(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg);

}  // namespace radar
