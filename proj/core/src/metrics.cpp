#include "svs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace svs {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                          std::to_string(labels.size()) + ")");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("score is NaN");
  }
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of positive ranks, ties sharing their average rank. Ranks are kept
  // doubled so they stay integral.
  std::uint64_t pos = 0;
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t avg2 = static_cast<std::uint64_t>(i + 1 + j);  // 2 * mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        ++pos;
        rank_sum2 += avg2;
      }
    }
    i = j;
  }
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw UndefinedAucError("AUC is undefined without both classes");
  const double u2 = static_cast<double>(rank_sum2 - pos * (pos + 1));
  return u2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

AnomalyEvaluation evaluate_anomaly_run(std::span<const double> frame_scores, std::span<const int> labels,
                                       double threshold) {
  check_inputs(frame_scores, labels);
  AnomalyEvaluation ev;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool flagged = frame_scores[i] >= threshold;
    const bool positive = labels[i] == 1;
    ev.flags += flagged;
    ev.positives += positive;
    ev.false_pos += flagged && !positive;
    ev.false_neg += !flagged && positive;
  }
  ev.negatives = labels.size() - ev.positives;
  if (ev.positives > 0 && ev.negatives > 0) ev.auc = auc_roc(frame_scores, labels);
  return ev;
}

}  // namespace svs
