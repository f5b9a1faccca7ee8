#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "svs/error.hpp"

namespace svs {

// Thrown when the labels hold only one class.
class UndefinedAucError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Probability that a random positive outscores a random negative, ties
// counting one half. Computed from average ranks in O(n log n).
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct AnomalyEvaluation {
  std::optional<double> auc;  // absent when the labels hold one class
  std::size_t flags = 0;  // frames with score >= threshold
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Frame scores against 0/1 ground truth, flagging at `threshold` inclusive.
// Throws ValidationError on a length mismatch or a label other than 0/1.
AnomalyEvaluation evaluate_anomaly_run(std::span<const double> frame_scores, std::span<const int> labels,
                                       double threshold);

}  // namespace svs
