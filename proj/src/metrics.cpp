#include "agcn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "agcn/errors.hpp"

namespace agcn::metrics {

void EvalBatch::validate() const {
  if (scores.rows() == 0) throw DataError("EvalBatch: no examples");
  if (!scores.same_shape(truth)) throw DataError("EvalBatch: scores and truth shapes differ");
  for (double s : scores.data()) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("EvalBatch: score outside [0,1]");
  }
  for (double t : truth.data()) {
    if (t != 0.0 && t != 1.0) throw DataError("EvalBatch: ground truth must be 0/1");
  }
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

MetricReport prf_metrics(const EvalBatch& batch) {
  batch.validate();
  const std::size_t n = batch.scores.rows();
  const std::size_t c = batch.scores.cols();
  std::vector<double> correct(c, 0.0), predicted(c, 0.0), ground(c, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t k = 0; k < c; ++k) {
      const bool pred = batch.scores(e, k) > batch.threshold;
      const bool truth = batch.truth(e, k) != 0.0;
      predicted[k] += pred;
      ground[k] += truth;
      correct[k] += pred && truth;
    }
  }
  const double sum_c = std::accumulate(correct.begin(), correct.end(), 0.0);
  const double sum_p = std::accumulate(predicted.begin(), predicted.end(), 0.0);
  const double sum_g = std::accumulate(ground.begin(), ground.end(), 0.0);

  MetricReport r;
  r.overall_precision = ratio(sum_c, sum_p);
  r.overall_recall = ratio(sum_c, sum_g);
  double cp = 0.0, cr = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    cp += ratio(correct[k], predicted[k]);
    cr += ratio(correct[k], ground[k]);
  }
  r.per_class_precision = c > 0 ? cp / static_cast<double>(c) : 0.0;
  r.per_class_recall = c > 0 ? cr / static_cast<double>(c) : 0.0;
  r.overall_f1 = harmonic(r.overall_precision, r.overall_recall);
  r.per_class_f1 = harmonic(r.per_class_precision, r.per_class_recall);
  return r;
}

double average_precision(std::span<const double> scores, const std::vector<bool>& positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive[order[rank]]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(rank + 1);
  }
  return hits > 0.0 ? sum / hits : 0.0;
}

double mean_average_precision(const EvalBatch& batch) {
  batch.validate();
  const std::size_t n = batch.scores.rows();
  double total = 0.0;
  std::size_t classes = 0;
  std::vector<double> col(n);
  std::vector<bool> pos(n);
  for (std::size_t k = 0; k < batch.scores.cols(); ++k) {
    bool any = false;
    for (std::size_t e = 0; e < n; ++e) {
      col[e] = batch.scores(e, k);
      pos[e] = batch.truth(e, k) != 0.0;
      any = any || pos[e];
    }
    if (!any) continue;
    total += average_precision(col, pos);
    ++classes;
  }
  if (classes == 0) throw DataError("mAP is undefined: no class has a positive example");
  return total / static_cast<double>(classes);
}

MetricReport evaluate(const EvalBatch& batch) {
  MetricReport r = prf_metrics(batch);
  r.mean_ap = mean_average_precision(batch);
  return r;
}

void PerformanceTable::record(int after_task, int eval_task, double value) {
  if (eval_task < 1 || after_task < eval_task) {
    throw DataError("PerformanceTable: need 1 <= eval_task <= after_task");
  }
  if (!values_.emplace(std::make_pair(after_task, eval_task), value).second) {
    throw DataError("PerformanceTable: a[" + std::to_string(after_task) + "," +
                    std::to_string(eval_task) + "] recorded twice");
  }
}

std::optional<double> PerformanceTable::get(int after_task, int eval_task) const {
  auto it = values_.find({after_task, eval_task});
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double forgetting(const PerformanceTable& table, int t) {
  if (t < 2) throw DataError("forgetting is defined from the second task on");
  auto need = [&](int l, int j) {
    auto v = table.get(l, j);
    if (!v) {
      throw DataError("forgetting: missing a[" + std::to_string(l) + "," + std::to_string(j) + "]");
    }
    return *v;
  };
  double total = 0.0;
  for (int j = 1; j < t; ++j) {
    double best = need(j, j);
    for (int l = j + 1; l < t; ++l) best = std::max(best, need(l, j));
    total += best - need(t, j);
  }
  return total / static_cast<double>(t - 1);
}

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["OP"] = r.overall_precision;
  j["CP"] = r.per_class_precision;
  j["OR"] = r.overall_recall;
  j["CR"] = r.per_class_recall;
  j["OF1"] = r.overall_f1;
  j["CF1"] = r.per_class_f1;
  j["mAP"] = r.mean_ap ? nlohmann::ordered_json(*r.mean_ap) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

std::string report_csv_header() { return "OP,CP,OR,CR,OF1,CF1,mAP"; }

std::string report_csv_row(const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", r.overall_precision,
                r.per_class_precision, r.overall_recall, r.per_class_recall, r.overall_f1,
                r.per_class_f1);
  std::string row = buf;
  if (r.mean_ap) {
    std::snprintf(buf, sizeof buf, "%.17g", *r.mean_ap);
    row += buf;
  }
  return row;
}

}  // namespace agcn::metrics
