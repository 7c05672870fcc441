#include "radar/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "radar/io_util.hpp"
#include "radar/metrics.hpp"
#include "radar/ops.hpp"
#include "radar/rng.hpp"

namespace radar {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double cosine_lr(double base, int epoch, int t_max) {
  const int e = std::min(epoch, t_max);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * double(e) / double(t_max)));
}

struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  int bad = 0;

  void observe(double val_loss, int patience, double factor, Adam& opt) {
    if (val_loss < best) {
      best = val_loss;
      bad = 0;
      return;
    }
    if (++bad >= patience) {
      opt.set_lr(opt.lr() * factor);
      bad = 0;
    }
  }
};

std::vector<int> epoch_batch(const std::vector<int>& idx, int b, int batch) {
  return std::vector<int>(idx.begin() + size_t(b) * size_t(batch),
                          idx.begin() + size_t(b + 1) * size_t(batch));
}

Tensor concat_batches(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3))
    throw std::invalid_argument("concat_batches needs matching item shapes");
  std::vector<double> vals;
  vals.reserve(a.values().size() + b.values().size());
  vals.insert(vals.end(), a.values().begin(), a.values().end());
  vals.insert(vals.end(), b.values().begin(), b.values().end());
  Shape s = a.shape();
  s[0] += b.dim(0);
  return Tensor(s, std::move(vals));
}

// Mean cross-entropy and accuracy over the whole dataset, in chunks.
std::pair<double, double> eval_classifier(const Model& f, const Dataset& data, int chunk) {
  double loss_sum = 0.0;
  size_t hits = 0;
  for (int start = 0; start < data.size(); start += chunk) {
    const int n = std::min(chunk, data.size() - start);
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = image_batch(data, idx);
    const std::vector<int> y = label_batch(data, idx);
    Tape tape;
    Tensor logits = f.forward(tape, x);
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    for (double v : ce.values()) loss_sum += v;
    const std::vector<int> pred = argmax_rows(logits);
    for (int i = 0; i < n; ++i) hits += size_t(pred[size_t(i)] == y[size_t(i)]);
  }
  return {loss_sum / double(data.size()), double(hits) / double(data.size())};
}

// Detector BCE and AUC on a fixed benign/adversarial pair of batches.
std::pair<double, double> eval_detector(const Model& g, const Tensor& x_ben,
                                        const Tensor& x_adv) {
  const std::vector<double> sb = detect_scores(g, x_ben);
  const std::vector<double> sa = detect_scores(g, x_adv);
  double loss = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
  for (double p : sb) {
    loss += -std::log(1.0 - std::clamp(p, kBceProbClamp, 1.0 - kBceProbClamp));
    scores.push_back(p);
    labels.push_back(0);
  }
  for (double p : sa) {
    loss += -std::log(std::clamp(p, kBceProbClamp, 1.0 - kBceProbClamp));
    scores.push_back(p);
    labels.push_back(1);
  }
  return {loss / double(sb.size() + sa.size()), roc_auc(scores, labels)};
}

// Seeded fixed subset of val used for attacked validation.
std::vector<int> val_subset(const Dataset& val, int want, uint64_t seed, const char* tag) {
  std::vector<int> idx(static_cast<size_t>(val.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, tag));
  rng.shuffle(idx);
  idx.resize(size_t(std::min(want, val.size())));
  return idx;
}

[[noreturn]] void rethrow_divergence(const char* phase, int epoch, int batch,
                                     const NonFiniteError& e) {
  throw TrainDivergence(std::string(phase) + " diverged at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch) + ": " + e.what());
}

}  // namespace

std::string schedule_name(Schedule s) {
  switch (s) {
    case Schedule::none: return "none";
    case Schedule::cosine: return "cosine";
    case Schedule::plateau: return "plateau";
  }
  return "?";
}

Schedule parse_schedule(const std::string& s) {
  if (s == "none") return Schedule::none;
  if (s == "cosine") return Schedule::cosine;
  if (s == "plateau") return Schedule::plateau;
  throw std::invalid_argument("unknown schedule '" + s + "' (want none, cosine, or plateau)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train epochs must be >= 1");
  if (batch < 1) throw std::invalid_argument("train batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train lr must be positive");
  if (t_max < 1) throw std::invalid_argument("train t_max must be >= 1");
  if (patience < 1) throw std::invalid_argument("train patience must be >= 1");
  if (!(factor > 0.0 && factor <= 1.0))
    throw std::invalid_argument("train factor must lie in (0,1]");
  if (val_attack_items < 1) throw std::invalid_argument("val_attack_items must be >= 1");
}

void TrainLog::add(int epoch, std::string split, std::string metric, double value) {
  rows.push_back({epoch, std::move(split), std::move(metric), value});
}

double TrainLog::last(const std::string& split, const std::string& metric) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->split == split && it->metric == metric) return it->value;
  throw std::invalid_argument("no TrainLog entry for " + split + "/" + metric);
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,split,metric,value\n";
  for (const TrainLogRow& r : log.rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += r.split;
    out += ',';
    out += r.metric;
    out += ',';
    out += format_double(r.value);
    out += '\n';
  }
  return out;
}

Adam::Adam(std::vector<Tensor> params, double lr) : params_(std::move(params)), lr_(lr) {
  if (!(lr_ > 0.0) && lr_ != 0.0) throw std::invalid_argument("Adam lr must be finite");
  for (const Tensor& p : params_) {
    m_.emplace_back(size_t(p.size()), 0.0);
    v_.emplace_back(size_t(p.size()), 0.0);
  }
}

void Adam::set_lr(double lr) { lr_ = lr; }

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, double(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, double(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const bool has = p.has_grad();
    std::vector<double>& vals = p.values_mut();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double g = has ? p.grad()[i] : 0.0;
      m_[pi][i] = kBeta1 * m_[pi][i] + (1.0 - kBeta1) * g;
      v_[pi][i] = kBeta2 * v_[pi][i] + (1.0 - kBeta2) * g * g;
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      vals[i] -= lr_ * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

void Adam::zero_grad() {
  for (const Tensor& p : params_) p.clear_grad();
}

TrainLog train_clean(Model& f, const Dataset& train, const Dataset& val,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (f.is_detector()) throw std::invalid_argument("train_clean expects a classifier");
  if (train.size() < cfg.batch)
    throw std::invalid_argument("batch size exceeds the training set");

  f.set_mode(Mode::train);
  Adam opt(f.params(), cfg.lr);
  TrainLog log;
  PlateauState plateau;
  const int nb = train.size() / cfg.batch;  // last partial batch dropped
  std::vector<int> idx(static_cast<size_t>(train.size()));
  std::iota(idx.begin(), idx.end(), 0);

  for (int e = 0; e < cfg.epochs; ++e) {
    if (cfg.schedule == Schedule::cosine) opt.set_lr(cosine_lr(cfg.lr, e, cfg.t_max));
    Rng rng(derive_seed(cfg.seed, "clean-shuffle", uint64_t(e)));
    rng.shuffle(idx);

    double loss_sum = 0.0;
    size_t hits = 0;
    for (int b = 0; b < nb; ++b) {
      const std::vector<int> bidx = epoch_batch(idx, b, cfg.batch);
      Tensor x = image_batch(train, bidx);
      const std::vector<int> y = label_batch(train, bidx);
      try {
        Tape tape;
        Tensor logits = f.forward(tape, x);
        Tensor loss = cross_entropy(tape, logits, y);
        loss_sum += loss.item();
        const std::vector<int> pred = argmax_rows(logits);
        for (int i = 0; i < cfg.batch; ++i) hits += size_t(pred[size_t(i)] == y[size_t(i)]);
        opt.zero_grad();
        backward(tape, loss);
        opt.step();
      } catch (const NonFiniteError& err) {
        rethrow_divergence("train_clean", e, b, err);
      }
    }
    log.add(e, "train", "loss", loss_sum / double(nb));
    log.add(e, "train", "accuracy", double(hits) / double(size_t(nb) * size_t(cfg.batch)));
    log.add(e, "train", "lr", opt.lr());

    f.set_mode(Mode::eval);
    const auto [vloss, vacc] = eval_classifier(f, val, cfg.batch);
    f.set_mode(Mode::train);
    log.add(e, "val", "loss", vloss);
    log.add(e, "val", "accuracy", vacc);
    if (cfg.schedule == Schedule::plateau) plateau.observe(vloss, cfg.patience, cfg.factor, opt);
  }
  f.set_mode(Mode::eval);
  return log;
}

TrainLog train_detector_initial(Model& g, const Model& f_frozen, const Dataset& train,
                                const Dataset& val, const TrainConfig& cfg,
                                const AttackConfig& craft) {
  cfg.validate();
  craft.validate();
  if (!g.is_detector()) throw std::invalid_argument("train_detector_initial expects a detector");
  if (f_frozen.is_detector())
    throw std::invalid_argument("train_detector_initial expects a classifier to attack");
  if (f_frozen.mode() != Mode::eval)
    throw std::logic_error("the classifier must be frozen in eval mode");
  if (train.size() < cfg.batch)
    throw std::invalid_argument("batch size exceeds the training set");

  AttackConfig craft_pgd = craft;  // this phase always crafts plain PGD
  craft_pgd.kind = AttackKind::pgd;

  // Fixed attacked validation subset; PGD ignores g, so crafting once up
  // front loses nothing.
  const std::vector<int> vidx = val_subset(val, cfg.val_attack_items, cfg.seed, "det-val");
  const Tensor x_vb = image_batch(val, vidx);
  const Tensor x_va = pgd_attack(f_frozen, x_vb, label_batch(val, vidx), craft_pgd).x_adv;

  g.set_mode(Mode::train);
  Adam opt(g.params(), cfg.lr);
  TrainLog log;
  PlateauState plateau;
  const int nb = train.size() / cfg.batch;
  std::vector<int> idx(static_cast<size_t>(train.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> targets(size_t(2 * cfg.batch), 0.0);
  for (int i = 0; i < cfg.batch; ++i) targets[size_t(cfg.batch + i)] = 1.0;

  for (int e = 0; e < cfg.epochs; ++e) {
    if (cfg.schedule == Schedule::cosine) opt.set_lr(cosine_lr(cfg.lr, e, cfg.t_max));
    Rng rng(derive_seed(cfg.seed, "det-shuffle", uint64_t(e)));
    rng.shuffle(idx);

    double loss_sum = 0.0;
    std::vector<double> epoch_scores;
    std::vector<int> epoch_labels;
    for (int b = 0; b < nb; ++b) {
      const std::vector<int> bidx = epoch_batch(idx, b, cfg.batch);
      Tensor x = image_batch(train, bidx);
      const std::vector<int> y = label_batch(train, bidx);
      try {
        const Tensor x_adv = pgd_attack(f_frozen, x, y, craft_pgd).x_adv;
        const Tensor mixed = concat_batches(x, x_adv);
        Tape tape;
        Tensor probs = g.forward(tape, mixed);
        Tensor loss = binary_cross_entropy(tape, probs, targets);
        loss_sum += loss.item();
        for (size_t i = 0; i < probs.values().size(); ++i) {
          epoch_scores.push_back(probs.values()[i]);
          epoch_labels.push_back(int(targets[i]));
        }
        opt.zero_grad();
        backward(tape, loss);
        opt.step();
      } catch (const NonFiniteError& err) {
        rethrow_divergence("train_detector_initial", e, b, err);
      }
    }
    log.add(e, "train", "loss", loss_sum / double(nb));
    log.add(e, "train", "auc", roc_auc(epoch_scores, epoch_labels));
    log.add(e, "train", "lr", opt.lr());

    g.set_mode(Mode::eval);
    const auto [vloss, vauc] = eval_detector(g, x_vb, x_va);
    g.set_mode(Mode::train);
    log.add(e, "val", "loss", vloss);
    log.add(e, "val", "auc", vauc);
    if (cfg.schedule == Schedule::plateau) plateau.observe(vloss, cfg.patience, cfg.factor, opt);
  }
  g.set_mode(Mode::eval);
  return log;
}

TrainLog radar_finetune(Model& g, const Model& f_frozen, const Dataset& train,
                        const Dataset& val, const TrainConfig& cfg, const AttackConfig& craft) {
  cfg.validate();
  craft.validate();
  if (craft.kind != AttackKind::spgd && craft.kind != AttackKind::opgd)
    throw std::invalid_argument("radar_finetune crafts with spgd or opgd");
  if (!g.is_detector()) throw std::invalid_argument("radar_finetune expects a detector");
  if (f_frozen.is_detector())
    throw std::invalid_argument("radar_finetune expects a classifier to attack");
  if (f_frozen.mode() != Mode::eval)
    throw std::logic_error("the classifier must be frozen in eval mode");
  if (train.size() < cfg.batch)
    throw std::invalid_argument("batch size exceeds the training set");

  // Fixed held-out attacked set, crafted once against the incoming detector;
  // the plateau schedule and the logged validation loss both use it.
  const std::vector<int> vidx = val_subset(val, cfg.val_attack_items, cfg.seed, "radar-val");
  const Tensor x_vb = image_batch(val, vidx);
  g.set_mode(Mode::eval);
  const Tensor x_va = run_attack(f_frozen, &g, x_vb, label_batch(val, vidx), craft).x_adv;

  g.set_mode(Mode::train);
  Adam opt(g.params(), cfg.lr);
  TrainLog log;
  PlateauState plateau;
  const int nb = train.size() / cfg.batch;
  std::vector<int> idx(static_cast<size_t>(train.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> targets(size_t(2 * cfg.batch), 0.0);
  for (int i = 0; i < cfg.batch; ++i) targets[size_t(cfg.batch + i)] = 1.0;

  for (int e = 0; e < cfg.epochs; ++e) {
    Rng rng(derive_seed(cfg.seed, "radar-shuffle", uint64_t(e)));
    rng.shuffle(idx);

    double loss_sum = 0.0;
    std::vector<double> epoch_scores;
    std::vector<int> epoch_labels;
    for (int b = 0; b < nb; ++b) {
      const std::vector<int> bidx = epoch_batch(idx, b, cfg.batch);
      Tensor x = image_batch(train, bidx);
      const std::vector<int> y = label_batch(train, bidx);
      try {
        // Craft against the current detector, then train on the mixed batch.
        g.set_mode(Mode::eval);
        const Tensor x_adv = run_attack(f_frozen, &g, x, y, craft).x_adv;
        g.set_mode(Mode::train);

        const Tensor mixed = concat_batches(x, x_adv);
        Tape tape;
        Tensor probs = g.forward(tape, mixed);
        Tensor loss = binary_cross_entropy(tape, probs, targets);
        loss_sum += loss.item();
        for (size_t i = 0; i < probs.values().size(); ++i) {
          epoch_scores.push_back(probs.values()[i]);
          epoch_labels.push_back(int(targets[i]));
        }
        opt.zero_grad();
        backward(tape, loss);
        opt.step();
      } catch (const NonFiniteError& err) {
        rethrow_divergence("radar_finetune", e, b, err);
      }
    }
    log.add(e, "train", "loss", loss_sum / double(nb));
    log.add(e, "train", "auc", roc_auc(epoch_scores, epoch_labels));
    log.add(e, "train", "lr", opt.lr());

    g.set_mode(Mode::eval);
    const auto [vloss, vauc] = eval_detector(g, x_vb, x_va);
    g.set_mode(Mode::train);
    log.add(e, "val", "loss", vloss);
    log.add(e, "val", "auc", vauc);
    plateau.observe(vloss, cfg.patience, cfg.factor, opt);
  }
  g.set_mode(Mode::eval);
  return log;
}

}  // namespace radar
