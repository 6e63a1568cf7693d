#include <cmath>
#include <set>

#include "agcn/errors.hpp"
#include "agcn/metrics.hpp"
#include "doctest.h"
#include "testing.hpp"

namespace mt = agcn::metrics;
using agcn::numerics::Matrix;
using agcn::testing::Gen;

namespace {

// Per-example label sets, counted the long way.
mt::MetricReport brute_force(const Matrix& scores, const Matrix& truth, double threshold) {
  const std::size_t n = scores.rows(), c = scores.cols();
  std::vector<std::set<std::size_t>> pred(n), gt(n);
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t k = 0; k < c; ++k) {
      if (scores(e, k) > threshold) pred[e].insert(k);
      if (truth(e, k) == 1.0) gt[e].insert(k);
    }
  }
  std::vector<int> nc(c, 0), np(c, 0), ng(c, 0);
  for (std::size_t e = 0; e < n; ++e) {
    for (auto k : pred[e]) {
      ++np[k];
      if (gt[e].count(k)) ++nc[k];
    }
    for (auto k : gt[e]) ++ng[k];
  }
  auto div = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  auto f1 = [](double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; };
  double sc = 0, sp = 0, sg = 0, cp = 0, cr = 0;
  for (std::size_t k = 0; k < c; ++k) {
    sc += nc[k];
    sp += np[k];
    sg += ng[k];
    cp += div(nc[k], np[k]);
    cr += div(nc[k], ng[k]);
  }
  mt::MetricReport r;
  r.overall_precision = div(sc, sp);
  r.overall_recall = div(sc, sg);
  r.per_class_precision = cp / static_cast<double>(c);
  r.per_class_recall = cr / static_cast<double>(c);
  r.overall_f1 = f1(r.overall_precision, r.overall_recall);
  r.per_class_f1 = f1(r.per_class_precision, r.per_class_recall);
  return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("hand-counted report") {
  // truth {a}, {a,b}; predicted {a}, {a}
  const mt::EvalBatch batch{Matrix{{0.9, 0.1}, {0.8, 0.6}}, Matrix{{1, 0}, {1, 1}}, 0.7};
  const auto r = mt::prf_metrics(batch);
  CHECK(r.overall_precision == 1.0);
  CHECK(r.overall_recall == 2.0 / 3.0);
  CHECK(r.overall_f1 == 0.8);
  CHECK(r.per_class_precision == 0.5);
  CHECK(r.per_class_recall == 0.5);
  CHECK(r.per_class_f1 == 0.5);
}

TEST_CASE("threshold is strict") {
  const mt::EvalBatch at{Matrix{{0.7}}, Matrix{{1}}, 0.7};
  CHECK(mt::prf_metrics(at).overall_precision == 0.0);
  const mt::EvalBatch zero{Matrix{{0.01, 0.5}}, Matrix{{1, 1}}, 0.0};
  CHECK(mt::prf_metrics(zero).overall_recall == 1.0);
}

TEST_CASE("average precision by hand") {
  const std::vector<double> s{0.9, 0.8, 0.7};
  CHECK(std::abs(mt::average_precision(s, {true, false, true}) - 5.0 / 6.0) <= 1e-12);
  CHECK(mt::average_precision(s, {true, true, false}) == 1.0);
  // Ties rank the lower example index first.
  const std::vector<double> tie{0.5, 0.5};
  CHECK(mt::average_precision(tie, {false, true}) == 0.5);
  CHECK(mt::average_precision(tie, {true, false}) == 1.0);
}

TEST_CASE("mAP skips classes without positives") {
  const mt::EvalBatch b{Matrix{{0.9, 0.2, 0.4}, {0.1, 0.3, 0.6}}, Matrix{{1, 0, 0}, {0, 0, 1}}, 0.7};
  CHECK(mt::mean_average_precision(b) == 1.0);
  const mt::EvalBatch none{Matrix{{0.9}}, Matrix{{0}}, 0.7};
  CHECK_THROWS_AS(mt::mean_average_precision(none), agcn::DataError);
}

TEST_CASE("batch validation") {
  CHECK_THROWS_AS(mt::prf_metrics({Matrix(0, 2), Matrix(0, 2), 0.7}), agcn::DataError);
  CHECK_THROWS_AS(mt::prf_metrics({Matrix{{1.2}}, Matrix{{1}}, 0.7}), agcn::DataError);
  CHECK_THROWS_AS(mt::prf_metrics({Matrix{{0.2}}, Matrix{{0.5}}, 0.7}), agcn::DataError);
  CHECK_THROWS_AS(mt::prf_metrics({Matrix{{0.2}}, Matrix{{1, 0}}, 0.7}), agcn::DataError);
}

TEST_CASE("forgetting by hand") {
  mt::PerformanceTable t;
  t.record(1, 1, 0.8);
  t.record(2, 1, 0.5);
  t.record(2, 2, 0.9);
  // 0.8 - 0.5 is not the double nearest 0.3; the formula adds no error of its own.
  CHECK(mt::forgetting(t, 2) == 0.8 - 0.5);
  CHECK(mt::forgetting(t, 2) == doctest::Approx(0.3).epsilon(1e-15));

  // Best historical value, not the first one.
  t.record(3, 1, 0.6);
  t.record(3, 2, 0.9);
  t.record(3, 3, 0.4);
  CHECK(mt::forgetting(t, 3) == doctest::Approx(((0.8 - 0.6) + (0.9 - 0.9)) / 2));

  CHECK_THROWS_AS(t.record(2, 1, 0.1), agcn::DataError);
  CHECK_THROWS_AS(t.record(1, 2, 0.1), agcn::DataError);
  CHECK_THROWS_AS(mt::forgetting(t, 1), agcn::DataError);
  CHECK_THROWS_AS(mt::forgetting(t, 4), agcn::DataError);
}

TEST_CASE("monotone improvement means non-positive forgetting") {
  Gen g(2);
  for (int rep = 0; rep < 50; ++rep) {
    const int tasks = static_cast<int>(g.between(2, 6));
    mt::PerformanceTable t;
    for (int j = 1; j <= tasks; ++j) {
      double v = g.uniform(0, 0.5);
      for (int l = j; l <= tasks; ++l) {
        t.record(l, j, v);
        v += g.uniform(0, 0.1);
      }
    }
    for (int k = 2; k <= tasks; ++k) CHECK(mt::forgetting(t, k) <= 0.0);
  }
}

TEST_CASE("prf agrees with a brute-force counter") {
  Gen g(3);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = g.between(1, 100), c = g.between(1, 10);
    Matrix scores = g.matrix(n, c, 0, 1);
    // Some scores exactly at the threshold.
    for (double& s : scores.data())
      if (g.coin(0.05)) s = 0.7;
    const Matrix truth = g.binary(n, c, g.uniform(0, 1));
    const auto r = mt::prf_metrics({scores, truth, 0.7});
    CHECK(r == brute_force(scores, truth, 0.7));
  }
}

TEST_CASE("mAP is invariant to strictly monotone transforms") {
  Gen g(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = g.between(1, 60), c = g.between(1, 6);
    Matrix scores = g.matrix(n, c, 0, 1);
    for (double& s : scores.data())
      if (g.coin(0.1)) s = 0.5;  // ties survive the transform
    Matrix truth = g.binary(n, c, 0.3);
    truth(0, 0) = 1;
    Matrix cubed = scores, squashed = scores;
    for (double& s : cubed.data()) s = s * s * s;
    for (double& s : squashed.data()) s = (std::exp(s) - 1.0) / (std::exp(1.0) - 1.0);
    const double base = mt::mean_average_precision({scores, truth, 0.7});
    CHECK(mt::mean_average_precision({cubed, truth, 0.7}) == base);
    CHECK(mt::mean_average_precision({squashed, truth, 0.7}) == base);
  }
}

TEST_CASE("random scores give mAP near the positive rate") {
  Gen g(5);
  for (double p : {0.1, 0.3, 0.5}) {
    const Matrix scores = g.matrix(1000, 5, 0, 1);
    const Matrix truth = g.binary(1000, 5, p);
    CHECK(std::abs(mt::mean_average_precision({scores, truth, 0.7}) - p) <= 0.05);
  }
}

TEST_CASE("exports") {
  const mt::EvalBatch batch{Matrix{{0.9, 0.1}, {0.8, 0.6}}, Matrix{{1, 0}, {1, 1}}, 0.7};
  const auto r = mt::evaluate(batch);
  REQUIRE(r.mean_ap.has_value());
  CHECK(mt::report_csv_header() == "OP,CP,OR,CR,OF1,CF1,mAP");
  CHECK(mt::report_csv_row(r).rfind("1,0.5,", 0) == 0);
  CHECK(mt::report_json(r).find("\"OF1\"") != std::string::npos);
}

}  // TEST_SUITE
