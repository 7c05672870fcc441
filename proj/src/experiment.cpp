#include "radar/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "radar/io_util.hpp"
#include "radar/rng.hpp"

namespace radar {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct KeyContext {
  const std::string& origin;
  int line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(origin + " line " + std::to_string(line) + ": key '" + key + "' " + why);
  }
};

double parse_double(const KeyContext& ctx, const std::string& v) {
  if (v.empty()) ctx.fail("has an empty value");
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) ctx.fail("has a malformed number '" + v + "'");
  return d;
}

int parse_int(const KeyContext& ctx, const std::string& v) {
  if (v.empty()) ctx.fail("has an empty value");
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) ctx.fail("has a malformed integer '" + v + "'");
  if (n < INT32_MIN || n > INT32_MAX) ctx.fail("is out of range");
  return int(n);
}

uint64_t parse_u64(const KeyContext& ctx, const std::string& v) {
  if (v.empty()) ctx.fail("has an empty value");
  if (v[0] == '-') ctx.fail("must be non-negative");
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) ctx.fail("has a malformed integer '" + v + "'");
  return uint64_t(n);
}

void apply_attack_key(AttackConfig& a, const KeyContext& ctx, const std::string& key,
                      const std::string& value) {
  if (key == "kind") {
    try {
      a.kind = parse_attack_kind(value);
    } catch (const std::invalid_argument& e) {
      ctx.fail(std::string("— ") + e.what());
    }
  } else if (key == "epsilon") {
    a.epsilon = parse_double(ctx, value);
  } else if (key == "alpha") {
    a.alpha = parse_double(ctx, value);
  } else if (key == "iters") {
    a.iters = parse_int(ctx, value);
  } else {
    ctx.fail("is unknown in this section");
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  attack_craft.kind = AttackKind::spgd;
  attack_craft.iters = 10;
  attack_eval.kind = AttackKind::pgd;
  attack_eval.iters = 100;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;  // "" = top level
  std::set<std::string> seen;
  int line = 0;

  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;

    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError(origin + " line " + std::to_string(line) + ": unterminated section");
      section = trim(s.substr(1, s.size() - 2));
      static const std::set<std::string> known = {"dataset",      "model", "train",
                                                  "attack_craft", "attack_eval", "eval"};
      if (!known.count(section))
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown section '[" +
                          section + "]'");
      continue;
    }

    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + " line " + std::to_string(line) + ": empty key");
    if (!seen.insert(section + "/" + key).second)
      throw ConfigError(origin + " line " + std::to_string(line) + ": duplicate key '" + key +
                        "'");
    const KeyContext ctx{origin, line, key};

    if (section.empty()) {
      if (key == "seed") {
        cfg.seed = parse_u64(ctx, value);
        cfg.has_seed = true;
      } else if (key == "out_dir") {
        if (value.empty()) ctx.fail("has an empty value");
        cfg.out_dir = value;
      } else {
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                          "' at top level");
      }
    } else if (section == "dataset") {
      if (key == "kind") {
        if (value != "synth" && value != "cifar10")
          ctx.fail("must be 'synth' or 'cifar10', got '" + value + "'");
        cfg.dataset.kind = value;
      } else if (key == "path") {
        cfg.dataset.path = value;
      } else if (key == "train_fraction") {
        cfg.dataset.train_fraction = parse_double(ctx, value);
      } else if (key == "classes") {
        cfg.dataset.synth.num_classes = parse_int(ctx, value);
      } else if (key == "per_class") {
        cfg.dataset.synth.per_class = parse_int(ctx, value);
      } else if (key == "channels") {
        cfg.dataset.synth.channels = parse_int(ctx, value);
      } else if (key == "size") {
        cfg.dataset.synth.size = parse_int(ctx, value);
      } else if (key == "sigma") {
        cfg.dataset.synth.sigma = parse_double(ctx, value);
      } else {
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                          "' in [dataset]");
      }
    } else if (section == "model") {
      if (key == "classifier_arch") {
        cfg.model.classifier_arch = value;
      } else if (key == "detector_arch") {
        cfg.model.detector_arch = value;
      } else {
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                          "' in [model]");
      }
    } else if (section == "train") {
      TrainSection& t = cfg.train;
      if (key == "epochs") t.base.epochs = parse_int(ctx, value);
      else if (key == "batch") t.base.batch = parse_int(ctx, value);
      else if (key == "lr") t.base.lr = parse_double(ctx, value);
      else if (key == "schedule") {
        try {
          t.base.schedule = parse_schedule(value);
        } catch (const std::invalid_argument& e) {
          ctx.fail(std::string("— ") + e.what());
        }
      } else if (key == "t_max") t.base.t_max = parse_int(ctx, value);
      else if (key == "patience") t.base.patience = parse_int(ctx, value);
      else if (key == "factor") t.base.factor = parse_double(ctx, value);
      else if (key == "val_attack_items") t.base.val_attack_items = parse_int(ctx, value);
      else if (key == "classifier_epochs") t.classifier_epochs = parse_int(ctx, value);
      else if (key == "detector_epochs") t.detector_epochs = parse_int(ctx, value);
      else if (key == "finetune_epochs") t.finetune_epochs = parse_int(ctx, value);
      else if (key == "classifier_lr") t.classifier_lr = parse_double(ctx, value);
      else if (key == "detector_lr") t.detector_lr = parse_double(ctx, value);
      else if (key == "finetune_lr") t.finetune_lr = parse_double(ctx, value);
      else
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                          "' in [train]");
    } else if (section == "attack_craft") {
      apply_attack_key(cfg.attack_craft, ctx, key, value);
    } else if (section == "attack_eval") {
      apply_attack_key(cfg.attack_eval, ctx, key, value);
    } else if (section == "eval") {
      EvalSection& e = cfg.eval;
      if (key == "attacks") {
        e.attacks.clear();
        std::istringstream list(value);
        std::string part;
        while (std::getline(list, part, ',')) {
          part = trim(part);
          if (part.empty()) ctx.fail("has an empty attack entry");
          try {
            e.attacks.push_back(parse_attack_kind(part));
          } catch (const std::invalid_argument& err) {
            ctx.fail(std::string("— ") + err.what());
          }
        }
        if (e.attacks.empty()) ctx.fail("needs at least one attack");
      } else if (key == "n_percent") {
        e.n_percent = parse_double(ctx, value);
      } else if (key == "items") {
        e.items = parse_int(ctx, value);
      } else if (key == "attack_items") {
        e.attack_items = parse_int(ctx, value);
      } else if (key == "detector_checkpoint") {
        e.detector_checkpoint = value;
      } else if (key == "tag") {
        if (value.empty()) ctx.fail("has an empty value");
        e.tag = value;
      } else {
        throw ConfigError(origin + " line " + std::to_string(line) + ": unknown key '" + key +
                          "' in [eval]");
      }
    }
  }

  if (!cfg.has_seed) throw ConfigError(origin + ": missing mandatory key 'seed'");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(text, path);
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == "cifar10") {
    if (cfg.dataset.path.empty())
      throw ConfigError("dataset kind cifar10 needs [dataset] path");
    return load_cifar10(cfg.dataset.path);
  }
  SynthConfig sc = cfg.dataset.synth;
  sc.seed = cfg.seed;
  return synth_dataset(sc);
}

ArchConfig make_arch(const ExperimentConfig& cfg, const std::string& arch_name) {
  ArchConfig ac;
  ac.arch = arch_name;
  if (cfg.dataset.kind == "cifar10") {
    ac.in_channels = 3;
    ac.height = ac.width = 32;
    ac.num_classes = 10;
  } else {
    ac.in_channels = cfg.dataset.synth.channels;
    ac.height = ac.width = cfg.dataset.synth.size;
    ac.num_classes = cfg.dataset.synth.num_classes;
  }
  return ac;
}

TrainConfig phase_train_config(const ExperimentConfig& cfg, const std::string& phase) {
  TrainConfig t = cfg.train.base;
  t.seed = cfg.seed;
  const TrainSection& s = cfg.train;
  if (phase == "classifier") {
    if (s.classifier_epochs >= 0) t.epochs = s.classifier_epochs;
    if (s.classifier_lr >= 0.0) t.lr = s.classifier_lr;
  } else if (phase == "detector") {
    if (s.detector_epochs >= 0) t.epochs = s.detector_epochs;
    if (s.detector_lr >= 0.0) t.lr = s.detector_lr;
  } else if (phase == "finetune") {
    if (s.finetune_epochs >= 0) t.epochs = s.finetune_epochs;
    if (s.finetune_lr >= 0.0) t.lr = s.finetune_lr;
  } else {
    throw std::invalid_argument("unknown train phase '" + phase + "'");
  }
  return t;
}

std::string output_path(const ExperimentConfig& cfg, const std::string& name) {
  if (!name.empty() && name.front() == '/') return name;
  return cfg.out_dir + "/" + name;
}

EvalReport evaluate_models(const Model& f, const Model& g, const Dataset& data,
                           const AttackConfig& base_attack,
                           const std::vector<AttackKind>& kinds, double n_percent, int items,
                           uint64_t seed, const std::string& tag) {
  if (f.mode() != Mode::eval || g.mode() != Mode::eval)
    throw std::logic_error("evaluate_models needs both models in eval mode");
  if (items < 2) throw std::invalid_argument("evaluate_models needs at least 2 items");

  std::vector<int> idx(static_cast<size_t>(data.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "eval-items"));
  rng.shuffle(idx);
  idx.resize(size_t(std::min(items, data.size())));

  const Tensor x_ben = image_batch(data, idx);
  const std::vector<int> y = label_batch(data, idx);

  EvalReport report;
  report.tag = tag;
  report.seed = seed;
  report.n_percent = n_percent;
  report.clean_accuracy = accuracy(predict_labels(f, x_ben), y);
  const std::vector<double> ben_scores = detect_scores(g, x_ben);

  for (AttackKind kind : kinds) {
    AttackConfig acfg = base_attack;
    acfg.kind = kind;
    const AttackResult res = run_attack(f, &g, x_ben, y, acfg);
    const std::vector<double> adv_scores = detect_scores(g, res.x_adv);

    std::vector<double> scores = ben_scores;
    scores.insert(scores.end(), adv_scores.begin(), adv_scores.end());
    std::vector<int> labels(ben_scores.size(), 0);
    labels.insert(labels.end(), adv_scores.size(), 1);

    AttackEval ae;
    ae.attack = attack_kind_name(kind);
    ae.auc = roc_auc(scores, labels);
    ae.success_rate = sr_at_n(ben_scores, adv_scores, res.classifier_fooled, n_percent);
    ae.adv_accuracy = accuracy(predict_labels(f, res.x_adv), y);
    report.attacks.push_back(std::move(ae));
  }
  return report;
}

namespace {

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

Model load_model(const ExperimentConfig& cfg, const std::string& name) {
  Model m = load_checkpoint(output_path(cfg, name));
  m.set_mode(Mode::eval);
  return m;
}

std::pair<Dataset, Dataset> load_split(const ExperimentConfig& cfg) {
  const Dataset data = build_dataset(cfg);
  return split(data, cfg.dataset.train_fraction, cfg.seed);
}

}  // namespace

void cmd_train_classifier(const ExperimentConfig& cfg) {
  const auto [tr, va] = load_split(cfg);
  Model f = build_classifier(make_arch(cfg, cfg.model.classifier_arch),
                             derive_seed(cfg.seed, "classifier-init"));
  const TrainLog log = train_clean(f, tr, va, phase_train_config(cfg, "classifier"));
  ensure_out_dir(cfg);
  save_checkpoint(f, output_path(cfg, "classifier.ckpt"));
  write_text_file(output_path(cfg, "train_classifier.csv"), train_log_csv(log));
}

void cmd_train_detector(const ExperimentConfig& cfg) {
  const auto [tr, va] = load_split(cfg);
  const Model f = load_model(cfg, "classifier.ckpt");
  Model g = build_detector(make_arch(cfg, cfg.model.detector_arch),
                           derive_seed(cfg.seed, "detector-init"));
  const TrainLog log =
      train_detector_initial(g, f, tr, va, phase_train_config(cfg, "detector"),
                             cfg.attack_craft);
  ensure_out_dir(cfg);
  save_checkpoint(g, output_path(cfg, "detector.ckpt"));
  write_text_file(output_path(cfg, "train_detector.csv"), train_log_csv(log));
}

void cmd_finetune_radar(const ExperimentConfig& cfg) {
  const auto [tr, va] = load_split(cfg);
  const Model f = load_model(cfg, "classifier.ckpt");
  Model g = load_model(cfg, "detector.ckpt");
  const TrainLog log =
      radar_finetune(g, f, tr, va, phase_train_config(cfg, "finetune"), cfg.attack_craft);
  ensure_out_dir(cfg);
  save_checkpoint(g, output_path(cfg, "detector_radar.ckpt"));
  write_text_file(output_path(cfg, "train_finetune.csv"), train_log_csv(log));
}

void cmd_attack(const ExperimentConfig& cfg) {
  const auto [tr, va] = load_split(cfg);
  const Model f = load_model(cfg, "classifier.ckpt");

  const AttackConfig acfg = cfg.attack_eval;
  Model g;
  bool have_g = !cfg.eval.detector_checkpoint.empty();
  if (acfg.kind != AttackKind::pgd && !have_g)
    throw std::runtime_error("attack kind " + attack_kind_name(acfg.kind) +
                             " needs [eval] detector_checkpoint");
  if (have_g) g = load_model(cfg, cfg.eval.detector_checkpoint);

  std::vector<int> idx(static_cast<size_t>(va.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(cfg.seed, "attack-items"));
  rng.shuffle(idx);
  idx.resize(size_t(std::min(cfg.eval.attack_items, va.size())));

  const Tensor x = image_batch(va, idx);
  const std::vector<int> y = label_batch(va, idx);
  const AttackResult res =
      run_attack(f, have_g ? &g : nullptr, x, y, acfg, /*record_trajectory=*/true, &idx);

  ensure_out_dir(cfg);
  const std::string kind = attack_kind_name(acfg.kind);
  write_tensor_file(output_path(cfg, "attack_" + kind + ".bin"), res.x_adv);
  write_trajectory_csv(output_path(cfg, "trajectory_" + kind + ".csv"), res.trajectory);

  std::string summary = "image_id,label,classifier_fooled,detector_evaded\n";
  for (size_t i = 0; i < idx.size(); ++i) {
    summary += std::to_string(idx[i]);
    summary += ',';
    summary += std::to_string(y[i]);
    summary += ',';
    summary += std::to_string(int(res.classifier_fooled[i]));
    summary += ',';
    if (!res.detector_evaded.empty()) summary += std::to_string(int(res.detector_evaded[i]));
    summary += '\n';
  }
  write_text_file(output_path(cfg, "attack_" + kind + "_summary.csv"), summary);
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  const auto [tr, va] = load_split(cfg);
  const Model f = load_model(cfg, "classifier.ckpt");
  if (cfg.eval.detector_checkpoint.empty())
    throw std::runtime_error("evaluate needs [eval] detector_checkpoint");
  const Model g = load_model(cfg, cfg.eval.detector_checkpoint);

  const EvalReport report =
      evaluate_models(f, g, va, cfg.attack_eval, cfg.eval.attacks, cfg.eval.n_percent,
                      cfg.eval.items, cfg.seed, cfg.eval.tag);
  ensure_out_dir(cfg);
  write_text_file(output_path(cfg, "eval_" + cfg.eval.tag + ".csv"), eval_report_csv(report));
  write_text_file(output_path(cfg, "eval_" + cfg.eval.tag + ".txt"),
                  eval_report_table(report));
}

}  // namespace radar
