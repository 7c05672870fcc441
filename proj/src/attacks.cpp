#include "radar/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "radar/io_util.hpp"
#include "radar/ops.hpp"

namespace radar {
namespace {

double ben_bce(double p) {
  const double q = std::clamp(p, kBceProbClamp, 1.0 - kBceProbClamp);
  return -std::log(1.0 - q);
}

void check_models(const Model& f, const Model* g) {
  if (f.is_detector()) throw std::invalid_argument("attack target f must be a classifier");
  if (f.mode() != Mode::eval)
    throw std::logic_error("attacks require the classifier in eval mode");
  if (g) {
    if (!g->is_detector()) throw std::invalid_argument("attack model g must be a detector");
    if (g->mode() != Mode::eval)
      throw std::logic_error("attacks require the detector in eval mode");
  }
}

void check_inputs(const Model& f, const Tensor& x, const std::vector<int>& y,
                  const std::vector<int>* image_ids) {
  if (x.rank() != 4)
    throw std::invalid_argument("attack input must be [B,C,H,W], got " + shape_str(x.shape()));
  const int B = x.dim(0);
  if (int(y.size()) != B)
    throw std::invalid_argument("attack got " + std::to_string(y.size()) + " labels for " +
                                std::to_string(B) + " images");
  const int K = f.arch().num_classes;
  for (int lbl : y)
    if (lbl < 0 || lbl >= K)
      throw std::invalid_argument("attack label " + std::to_string(lbl) + " outside [0," +
                                  std::to_string(K) + ")");
  for (double v : x.values())
    if (v < 0.0 || v > 1.0)
      throw std::invalid_argument("attack input pixel outside [0,1]");
  if (image_ids && int(image_ids->size()) != B)
    throw std::invalid_argument("image_ids size does not match the batch");
}

std::vector<double> step_project_values(const std::vector<double>& cur,
                                        const std::vector<double>& grad,
                                        const std::vector<double>& orig, double alpha,
                                        double epsilon) {
  std::vector<double> out(cur.size());
  for (size_t i = 0; i < cur.size(); ++i) {
    const double s = double(grad[i] > 0.0) - double(grad[i] < 0.0);
    const double stepped = cur[i] + alpha * s;
    const double boxed = std::clamp(stepped, orig[i] - epsilon, orig[i] + epsilon);
    out[i] = std::clamp(boxed, 0.0, 1.0);
  }
  return out;
}

double dot_span(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// out = u - (<u,v>/<v,v>) v; out = u when ||v|| < 1e-12.
void orth_component_span(const double* u, const double* v, size_t n, double* out) {
  const double vv = dot_span(v, v, n);
  if (std::sqrt(vv) < 1e-12) {
    std::copy(u, u + n, out);
    return;
  }
  const double c = dot_span(u, v, n) / vv;
  for (size_t i = 0; i < n; ++i) out[i] = u[i] - c * v[i];
}

int row_id(const std::vector<int>* image_ids, int i) { return image_ids ? (*image_ids)[i] : i; }

}  // namespace

std::string attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::pgd: return "pgd";
    case AttackKind::spgd: return "spgd";
    case AttackKind::opgd: return "opgd";
  }
  return "?";
}

AttackKind parse_attack_kind(const std::string& s) {
  if (s == "pgd") return AttackKind::pgd;
  if (s == "spgd") return AttackKind::spgd;
  if (s == "opgd") return AttackKind::opgd;
  throw std::invalid_argument("unknown attack kind '" + s + "' (want pgd, spgd, or opgd)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("attack epsilon must lie in [0,1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("attack alpha must be positive");
  if (iters < 0) throw std::invalid_argument("attack iters must be non-negative");
}

Tensor linf_step_project(const Tensor& x_cur, const Tensor& grad, const Tensor& x_orig,
                         double alpha, double epsilon) {
  if (x_cur.shape() != grad.shape() || x_cur.shape() != x_orig.shape())
    throw std::invalid_argument("linf_step_project needs matching shapes");
  return Tensor(x_cur.shape(),
                step_project_values(x_cur.values(), grad.values(), x_orig.values(), alpha,
                                    epsilon));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot needs equal-length vectors");
  return dot_span(a.data(), b.data(), a.size());
}

std::vector<double> orth_component(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("orth_component needs equal-length vectors");
  std::vector<double> out(u.size());
  orth_component_span(u.data(), v.data(), u.size(), out.data());
  return out;
}

AttackResult pgd_attack(const Model& f, const Tensor& x, const std::vector<int>& y,
                        const AttackConfig& cfg, bool record_trajectory,
                        const std::vector<int>* image_ids) {
  cfg.validate();
  check_models(f, nullptr);
  check_inputs(f, x, y, image_ids);
  const int B = x.dim(0);
  const std::vector<double>& orig = x.values();
  std::vector<double> cur = orig;

  AttackResult res;
  for (int t = 0; t < cfg.iters; ++t) {
    Tape tape;
    Tensor xt(x.shape(), cur);
    xt.set_requires_grad(true);
    Tensor logits = f.forward(tape, xt);
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    if (record_trajectory) {
      for (int i = 0; i < B; ++i)
        res.trajectory.push_back({row_id(image_ids, i), t, ce.values()[size_t(i)], std::nullopt, 1});
    }
    backward(tape, sum(tape, ce));
    cur = step_project_values(cur, xt.grad(), orig, cfg.alpha, cfg.epsilon);
  }

  // Final evaluation at the last iterate.
  res.x_adv = Tensor(x.shape(), cur);
  Tape tape;
  Tensor logits = f.forward(tape, res.x_adv);
  const std::vector<int> labels = argmax_rows(logits);
  res.classifier_fooled.resize(size_t(B));
  for (int i = 0; i < B; ++i) res.classifier_fooled[size_t(i)] = (labels[size_t(i)] != y[size_t(i)]);
  if (record_trajectory) {
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    for (int i = 0; i < B; ++i)
      res.trajectory.push_back(
          {row_id(image_ids, i), cfg.iters, ce.values()[size_t(i)], std::nullopt, 1});
  }
  return res;
}

AttackResult spgd_attack(const Model& f, const Model& g, const Tensor& x,
                         const std::vector<int>& y, const AttackConfig& cfg,
                         bool record_trajectory, const std::vector<int>* image_ids) {
  cfg.validate();
  check_models(f, &g);
  check_inputs(f, x, y, image_ids);
  const int B = x.dim(0);
  const std::vector<double>& orig = x.values();
  std::vector<double> cur = orig;
  const std::vector<double> adv_targets(size_t(B), 1.0);

  AttackResult res;
  bool stopped_early = false;
  for (int t = 0; t < cfg.iters && !stopped_early; ++t) {
    Tape tape;
    Tensor xt(x.shape(), cur);
    xt.set_requires_grad(true);
    Tensor logits = f.forward(tape, xt);
    Tensor probs = g.forward(tape, xt);
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    Tensor bce_adv = binary_cross_entropy_per_item(tape, probs, adv_targets);
    const std::vector<int> labels = argmax_rows(logits);

    // Per-item indicators at the current iterate: keep pushing the classifier
    // while it is still correct, keep pushing the detector while it still
    // flags the item.
    std::vector<double> w_ce(size_t(B), 0.0), w_bce(size_t(B), 0.0);
    bool any_active = false;
    for (int i = 0; i < B; ++i) {
      const bool still_correct = labels[size_t(i)] == y[size_t(i)];
      const bool still_flagged = probs.values()[size_t(i)] >= kDetectorThreshold;
      w_ce[size_t(i)] = still_correct ? 1.0 : 0.0;
      w_bce[size_t(i)] = still_flagged ? 1.0 : 0.0;
      any_active = any_active || still_correct || still_flagged;
      if (record_trajectory) {
        const int active = (still_correct ? 1 : 0) | (still_flagged ? 2 : 0);
        res.trajectory.push_back({row_id(image_ids, i), t, ce.values()[size_t(i)],
                                  ben_bce(probs.values()[size_t(i)]), active});
      }
    }
    if (!any_active) {
      stopped_early = true;
      break;
    }
    Tensor loss =
        add(tape, weighted_sum(tape, ce, w_ce), weighted_sum(tape, bce_adv, w_bce));
    backward(tape, loss);
    cur = step_project_values(cur, xt.grad(), orig, cfg.alpha, cfg.epsilon);
  }

  res.x_adv = Tensor(x.shape(), cur);
  Tape tape;
  Tensor logits = f.forward(tape, res.x_adv);
  Tensor probs = g.forward(tape, res.x_adv);
  const std::vector<int> labels = argmax_rows(logits);
  res.classifier_fooled.resize(size_t(B));
  res.detector_evaded.resize(size_t(B));
  for (int i = 0; i < B; ++i) {
    res.classifier_fooled[size_t(i)] = (labels[size_t(i)] != y[size_t(i)]);
    res.detector_evaded[size_t(i)] = (probs.values()[size_t(i)] < kDetectorThreshold);
  }
  if (record_trajectory && !stopped_early) {
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    for (int i = 0; i < B; ++i) {
      const bool still_correct = labels[size_t(i)] == y[size_t(i)];
      const bool still_flagged = probs.values()[size_t(i)] >= kDetectorThreshold;
      const int active = (still_correct ? 1 : 0) | (still_flagged ? 2 : 0);
      res.trajectory.push_back({row_id(image_ids, i), cfg.iters, ce.values()[size_t(i)],
                                ben_bce(probs.values()[size_t(i)]), active});
    }
  }
  return res;
}

AttackResult opgd_attack(const Model& f, const Model& g, const Tensor& x,
                         const std::vector<int>& y, const AttackConfig& cfg,
                         bool record_trajectory, const std::vector<int>* image_ids) {
  cfg.validate();
  check_models(f, &g);
  check_inputs(f, x, y, image_ids);
  const int B = x.dim(0);
  const size_t item = size_t(shape_numel(x.shape())) / size_t(B);
  const std::vector<double>& orig = x.values();
  std::vector<double> cur = orig;
  const std::vector<double> adv_targets(size_t(B), 1.0);

  AttackResult res;
  bool stopped_early = false;
  for (int t = 0; t < cfg.iters && !stopped_early; ++t) {
    // Two independent input copies so the classifier and detector gradients
    // arrive separately.
    Tape tf;
    Tensor xf(x.shape(), cur);
    xf.set_requires_grad(true);
    Tensor logits = f.forward(tf, xf);
    Tensor ce = cross_entropy_per_item(tf, logits, y);
    backward(tf, sum(tf, ce));

    Tape tg;
    Tensor xg(x.shape(), cur);
    xg.set_requires_grad(true);
    Tensor probs = g.forward(tg, xg);
    Tensor bce_adv = binary_cross_entropy_per_item(tg, probs, adv_targets);
    backward(tg, sum(tg, bce_adv));

    const std::vector<double>& grad_ce = xf.grad();
    const std::vector<double>& grad_bce = xg.grad();
    const std::vector<int> labels = argmax_rows(logits);

    std::vector<double> dir(cur.size(), 0.0);
    bool any_active = false;
    for (int i = 0; i < B; ++i) {
      const bool still_correct = labels[size_t(i)] == y[size_t(i)];
      const bool still_flagged = probs.values()[size_t(i)] >= kDetectorThreshold;
      const double* gc = grad_ce.data() + size_t(i) * item;
      const double* gb = grad_bce.data() + size_t(i) * item;
      double* d = dir.data() + size_t(i) * item;
      int active = 0;
      if (still_correct) {
        // Push the classifier; stay first-order neutral for the detector.
        orth_component_span(gc, gb, item, d);
        active = 1;
      } else if (still_flagged) {
        // Push the detector; stay first-order neutral for the classifier.
        orth_component_span(gb, gc, item, d);
        active = 2;
      }
      if (active != 0) {
        any_active = true;
        const double* prot = (active == 1) ? gb : gc;
        const double nd = std::sqrt(dot_span(d, d, item));
        const double nv = std::sqrt(dot_span(prot, prot, item));
        if (nd > 0.0 && nv > 0.0) {
          const double viol = std::abs(dot_span(d, prot, item)) / (nd * nv);
          res.orth_violation_max = std::max(res.orth_violation_max, viol);
        }
      }
      if (record_trajectory)
        res.trajectory.push_back({row_id(image_ids, i), t, ce.values()[size_t(i)],
                                  ben_bce(probs.values()[size_t(i)]), active});
    }
    if (!any_active) {
      stopped_early = true;
      break;
    }
    cur = step_project_values(cur, dir, orig, cfg.alpha, cfg.epsilon);
  }

  res.x_adv = Tensor(x.shape(), cur);
  Tape tape;
  Tensor logits = f.forward(tape, res.x_adv);
  Tensor probs = g.forward(tape, res.x_adv);
  const std::vector<int> labels = argmax_rows(logits);
  res.classifier_fooled.resize(size_t(B));
  res.detector_evaded.resize(size_t(B));
  for (int i = 0; i < B; ++i) {
    res.classifier_fooled[size_t(i)] = (labels[size_t(i)] != y[size_t(i)]);
    res.detector_evaded[size_t(i)] = (probs.values()[size_t(i)] < kDetectorThreshold);
  }
  if (record_trajectory && !stopped_early) {
    Tensor ce = cross_entropy_per_item(tape, logits, y);
    for (int i = 0; i < B; ++i) {
      const bool still_correct = labels[size_t(i)] == y[size_t(i)];
      const bool still_flagged = probs.values()[size_t(i)] >= kDetectorThreshold;
      const int active = still_correct ? 1 : (still_flagged ? 2 : 0);
      res.trajectory.push_back({row_id(image_ids, i), cfg.iters, ce.values()[size_t(i)],
                                ben_bce(probs.values()[size_t(i)]), active});
    }
  }
  return res;
}

AttackResult run_attack(const Model& f, const Model* g, const Tensor& x,
                        const std::vector<int>& y, const AttackConfig& cfg,
                        bool record_trajectory, const std::vector<int>* image_ids) {
  switch (cfg.kind) {
    case AttackKind::pgd: {
      AttackResult res = pgd_attack(f, x, y, cfg, record_trajectory, image_ids);
      if (g) {
        check_models(f, g);
        const std::vector<double> scores = detect_scores(*g, res.x_adv);
        res.detector_evaded.resize(scores.size());
        for (size_t i = 0; i < scores.size(); ++i)
          res.detector_evaded[i] = (scores[i] < kDetectorThreshold);
      }
      return res;
    }
    case AttackKind::spgd:
      if (!g) throw std::invalid_argument("spgd requires a detector");
      return spgd_attack(f, *g, x, y, cfg, record_trajectory, image_ids);
    case AttackKind::opgd:
      if (!g) throw std::invalid_argument("opgd requires a detector");
      return opgd_attack(f, *g, x, y, cfg, record_trajectory, image_ids);
  }
  throw std::invalid_argument("unknown attack kind");
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::string out = "image_id,iteration,loss_ce,loss_bce,active_case\n";
  for (const TrajectoryRow& r : rows) {
    out += std::to_string(r.image_id);
    out += ',';
    out += std::to_string(r.iteration);
    out += ',';
    out += format_double(r.loss_ce);
    out += ',';
    if (r.loss_bce) out += format_double(*r.loss_bce);
    out += ',';
    out += std::to_string(r.active_case);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace radar
