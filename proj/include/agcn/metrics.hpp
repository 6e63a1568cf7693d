#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn::metrics {

using numerics::Matrix;

/// Scores and binary ground truth for N examples over C classes.
struct EvalBatch {
  Matrix scores;  // N x C, in [0,1]
  Matrix truth;   // N x C, {0,1}
  double threshold = 0.7;

  /// Throws DataError on shape disagreement, an empty batch, scores outside
  /// [0,1] or non-binary truth.
  void validate() const;
};

struct MetricReport {
  double overall_precision = 0.0;    // OP
  double per_class_precision = 0.0;  // CP
  double overall_recall = 0.0;       // OR
  double per_class_recall = 0.0;     // CR
  double overall_f1 = 0.0;           // OF1
  double per_class_f1 = 0.0;         // CF1
  std::optional<double> mean_ap;     // mAP, when computed

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Overall and per-class precision / recall / F1 with predictions score > threshold.
/// Zero denominators contribute 0.
MetricReport prf_metrics(const EvalBatch& batch);

/// Mean over classes with at least one positive of the (non-interpolated)
/// average precision. Ties rank the lower example index first. Throws
/// DataError if no class has a positive.
double mean_average_precision(const EvalBatch& batch);

/// Average precision of one ranking. `scores` and `positive` are parallel.
double average_precision(std::span<const double> scores, const std::vector<bool>& positive);

/// prf_metrics plus mAP.
MetricReport evaluate(const EvalBatch& batch);

/// a[l, j]: a metric of task j measured after training task l (both 1-based, l >= j).
class PerformanceTable {
 public:
  /// Throws DataError if (l, j) was already recorded or l < j.
  void record(int after_task, int eval_task, double value);
  std::optional<double> get(int after_task, int eval_task) const;
  const std::map<std::pair<int, int>, double>& entries() const noexcept { return values_; }

  friend bool operator==(const PerformanceTable&, const PerformanceTable&) = default;

 private:
  std::map<std::pair<int, int>, double> values_;
};

/// F_t = mean over j < t of (max_{l in [j, t-1]} a[l, j] - a[t, j]). Requires
/// t >= 2; throws DataError when a needed value is missing.
double forgetting(const PerformanceTable& table, int t);

std::string report_json(const MetricReport& r);
/// "OP,CP,OR,CR,OF1,CF1,mAP" header and row helpers.
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);

}  // namespace agcn::metrics
