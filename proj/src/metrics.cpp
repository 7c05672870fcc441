#include "radar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "radar/io_util.hpp"

namespace radar {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores and labels differ in length");
  const size_t n = scores.size();
  size_t n_adv = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("roc_auc: non-finite score");
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("roc_auc: labels must be 0 (benign) or 1 (adversarial)");
    n_adv += size_t(labels[i]);
  }
  const size_t n_ben = n - n_adv;
  if (n_adv == 0 || n_ben == 0)
    throw std::invalid_argument("roc_auc needs at least one benign and one adversarial sample");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tied score runs, then the Mann-Whitney rank-sum statistic.
  double adv_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // average of ranks i+1 .. j
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) adv_rank_sum += midrank;
    i = j;
  }
  return (adv_rank_sum - 0.5 * double(n_adv) * double(n_adv + 1)) /
         (double(n_adv) * double(n_ben));
}

double roc_auc(const std::vector<ScoredSample>& samples) {
  std::vector<double> scores(samples.size());
  std::vector<int> labels(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    scores[i] = samples[i].score;
    labels[i] = samples[i].adversarial ? 1 : 0;
  }
  return roc_auc(scores, labels);
}

double sr_at_n(const std::vector<double>& ben_scores, const std::vector<double>& adv_scores,
               const std::vector<char>& adv_fooled, double n_percent) {
  if (ben_scores.empty() || adv_scores.empty())
    throw std::invalid_argument("sr_at_n needs non-empty benign and adversarial scores");
  if (adv_scores.size() != adv_fooled.size())
    throw std::invalid_argument("sr_at_n: adversarial scores and fooled flags differ in length");
  if (!(n_percent > 0.0 && n_percent < 100.0))
    throw std::invalid_argument("sr_at_n: n_percent must lie in (0,100)");
  for (double s : ben_scores)
    if (!std::isfinite(s)) throw std::invalid_argument("sr_at_n: non-finite benign score");
  for (double s : adv_scores)
    if (!std::isfinite(s)) throw std::invalid_argument("sr_at_n: non-finite adversarial score");

  // Candidate thresholds: every distinct benign score, plus one sentinel
  // strictly above the maximum (FPR 0, so a feasible tau always exists).
  std::vector<double> cand = ben_scores;
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  cand.push_back(cand.back() + 1.0);

  const double budget = n_percent / 100.0;
  double tau = cand.back();
  for (double c : cand) {
    size_t flagged = 0;
    for (double s : ben_scores) flagged += size_t(s >= c);
    if (double(flagged) / double(ben_scores.size()) <= budget) {
      tau = c;
      break;
    }
  }

  size_t successes = 0;
  for (size_t i = 0; i < adv_scores.size(); ++i)
    successes += size_t(adv_fooled[i] && adv_scores[i] < tau);
  return double(successes) / double(adv_scores.size());
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("accuracy: predictions and labels differ in length");
  if (predictions.empty()) throw std::invalid_argument("accuracy needs at least one item");
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) hits += size_t(predictions[i] == labels[i]);
  return double(hits) / double(predictions.size());
}

std::string eval_report_csv(const EvalReport& r) {
  std::string out = "metric,attack,value\n";
  out += "tag,," + r.tag + "\n";
  out += "seed,," + std::to_string(r.seed) + "\n";
  out += "n_percent,," + format_double(r.n_percent) + "\n";
  out += "clean_accuracy,," + format_double(r.clean_accuracy) + "\n";
  for (const AttackEval& a : r.attacks) {
    out += "auc," + a.attack + "," + format_double(a.auc) + "\n";
    out += "success_rate," + a.attack + "," + format_double(a.success_rate) + "\n";
    out += "adv_accuracy," + a.attack + "," + format_double(a.adv_accuracy) + "\n";
  }
  return out;
}

std::string eval_report_table(const EvalReport& r) {
  std::ostringstream os;
  char line[128];
  os << "evaluation (" << r.tag << "), seed " << r.seed << "\n";
  std::snprintf(line, sizeof line, "clean accuracy: %.4f\n\n", r.clean_accuracy);
  os << line;
  std::snprintf(line, sizeof line, "%-8s%10s%10s%12s\n", "attack", "auc",
                ("sr@" + format_double(r.n_percent)).c_str(), "adv_acc");
  os << line;
  for (const AttackEval& a : r.attacks) {
    std::snprintf(line, sizeof line, "%-8s%10.4f%10.4f%12.4f\n", a.attack.c_str(), a.auc,
                  a.success_rate, a.adv_accuracy);
    os << line;
  }
  return os.str();
}

}  // namespace radar
