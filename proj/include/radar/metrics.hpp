#pragma once

// Detection metrics: rank-based ROC-AUC, attack success rate at a capped
// false-positive budget (SR@N), plain accuracy, and the EvalReport bundle
// written as CSV plus an aligned text table.

#include <cstdint>
#include <string>
#include <vector>

namespace radar {

// One scored evaluation item: the detector's score (higher = more
// adversarial), its true origin, and — for adversarial items — whether the
// attack fooled the classifier.
struct ScoredSample {
  double score = 0.0;
  bool adversarial = false;
  bool classifier_fooled = false;
};

// Probability that a uniformly random adversarial sample outscores a
// uniformly random benign one, ties counted 1/2 (Mann-Whitney with
// midranks). labels: 0 benign, 1 adversarial. Errors when either class is
// missing or a score is non-finite.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);
double roc_auc(const std::vector<ScoredSample>& samples);

// Success rate at N% false positives. The threshold tau is the smallest
// candidate score (unique benign scores plus a sentinel above the maximum)
// whose benign false-positive rate, fraction of ben_scores >= tau, is at
// most n_percent/100. An attack succeeds iff it fooled the classifier AND
// its score falls below tau. Requires 0 < n_percent < 100 and non-empty
// inputs.
double sr_at_n(const std::vector<double>& ben_scores, const std::vector<double>& adv_scores,
               const std::vector<char>& adv_fooled, double n_percent);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct AttackEval {
  std::string attack;          // "pgd", "spgd", "opgd"
  double auc = 0.0;            // detector AUC on benign-vs-this-attack scores
  double success_rate = 0.0;   // SR@N for the report's n_percent
  double adv_accuracy = 0.0;   // classifier accuracy on the attacked images
};

struct EvalReport {
  std::string tag;             // which phase this report describes, e.g. "pre"/"post"
  uint64_t seed = 0;
  double n_percent = 5.0;
  double clean_accuracy = 0.0;
  std::vector<AttackEval> attacks;
};

std::string eval_report_csv(const EvalReport& r);
std::string eval_report_table(const EvalReport& r);

}  // namespace radar
