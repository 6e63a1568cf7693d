// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "agcn/losses.hpp"
#include "agcn/metrics.hpp"
#include "agcn/stream.hpp"
#include "agcn/trainer.hpp"
#include "testing.hpp"

namespace {

using agcn::numerics::Matrix;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 -------------------------------------------------------------------------

void acm_oracle() {
  const auto t0 = Clock::now();
  agcn::testing::Gen g(20240601);
  bool exact = true;
  double bayes = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto r = agcn::testing::acm_replay(g);
    exact = exact && r.b_exact && r.r_matches && r.old_old_frozen;
    bayes = std::max(bayes, r.bayes_rel_error);
  }
  const double dt = seconds_since(t0);
  report(1, exact && bayes <= 1e-12 && dt < 10.0,
         std::string("ACM replay oracle, 50 streams: B exact=") + (exact ? "yes" : "no") +
             fmt(", max Bayes rel err %.3g", bayes) + fmt(", %.2fs", dt));
}

// 2 -------------------------------------------------------------------------

void gradient_suite() {
  const auto t0 = Clock::now();
  agcn::testing::Gen g(7);
  const std::vector<std::pair<const char*, std::function<double(agcn::testing::Gen&)>>> checks{
      {"graph", agcn::testing::graph_gradient_error},
      {"backbone", agcn::testing::backbone_gradient_error},
      {"cls", agcn::testing::cls_gradient_error},
      {"dst", agcn::testing::dst_gradient_error},
      {"gph", agcn::testing::gph_gradient_error},
      {"combined", agcn::testing::combined_gradient_error},
  };
  std::string detail = "finite differences, 20 instances each:";
  bool ok = true;
  for (const auto& [name, fn] : checks) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) worst = std::max(worst, fn(g));
    ok = ok && worst < 1e-4;
    detail += std::string(" ") + name + fmt("=%.2g", worst);
  }
  const double dt = seconds_since(t0);
  report(2, ok && dt < 30.0, detail + fmt(", %.2fs", dt));
}

// 3 -------------------------------------------------------------------------

void hand_values() {
  namespace ls = agcn::losses;
  namespace mt = agcn::metrics;
  std::vector<std::string> bad;
  auto expect = [&](bool cond, const char* what) {
    if (!cond) bad.emplace_back(what);
  };

  const std::vector<double> y{1, 0}, half{0.5, 0.5}, h1{0.5};
  expect(std::abs(ls::cls_loss(y, half).value - 2 * std::log(2.0)) <= 1e-9, "cls");
  expect(std::abs(ls::dst_loss(h1, h1).value - std::log(2.0)) <= 1e-9, "dst");
  expect(ls::gph_loss(Matrix{{0, 0}}, Matrix{{3, 4}}).value == 25.0, "gph");

  const agcn::graph::GraphModel gm{Matrix{{2}}, Matrix{{3}}, agcn::Activation{0.2}};
  expect(agcn::graph::forward(Matrix{{1}}, Matrix{{1}}, gm).out(0, 0) == 6.0, "graph forward");

  const mt::EvalBatch batch{Matrix{{0.9, 0.1}, {0.8, 0.6}}, Matrix{{1, 0}, {1, 1}}, 0.7};
  const auto r = mt::prf_metrics(batch);
  expect(r.overall_precision == 1.0 && r.overall_recall == 2.0 / 3.0 && r.overall_f1 == 0.8 &&
             r.per_class_precision == 0.5 && r.per_class_recall == 0.5 && r.per_class_f1 == 0.5,
         "metric report");

  const std::vector<double> scores{0.9, 0.8, 0.7};
  expect(std::abs(mt::average_precision(scores, {true, false, true}) - 5.0 / 6.0) <= 1e-12, "AP");

  mt::PerformanceTable t;
  t.record(1, 1, 0.8);
  t.record(2, 1, 0.5);
  t.record(2, 2, 0.7);
  // Exact up to the representation of the inputs: 0.8 - 0.5 in binary64.
  expect(mt::forgetting(t, 2) == 0.8 - 0.5, "forgetting");

  std::string detail = "loss, graph, metric, AP and forgetting hand values";
  if (!bad.empty()) {
    detail += "; mismatched:";
    for (const auto& b : bad) detail += " " + b;
  }
  report(3, bad.empty(), detail);
}

// 4-7 -----------------------------------------------------------------------

struct Variant {
  const char* name;
  agcn::trainer::Mode mode;
  agcn::trainer::Ablation ablation;
};

struct Outcome {
  double final_map = 0.0;
  double forgetting = 0.0;
  bool single_pass = false;
  std::string metrics_csv;
  std::string losses_csv;
};

struct ContractLog {
  int boundaries = 0;
  int violations = 0;
};

// At each task boundary the freshly taken expert must reproduce the live model.
void check_boundary(const agcn::trainer::Trainer& t,
                    std::span<const agcn::stream::TaskStream> streams, ContractLog& log) {
  if (!t.expert()) return;
  ++log.boundaries;
  const auto& xpt = *t.expert();
  bool ok = agcn::losses::gph_loss(xpt.stored_graph(), t.graph_output()).value == 0.0;
  for (int k = 0; k < t.task(); ++k) {
    const auto& test = streams[static_cast<std::size_t>(k)].test;
    ok = ok && t.score(test) == xpt.soft_labels(agcn::testing::features_of(test));
  }
  if (!ok) ++log.violations;
}

Outcome run_variant(const std::vector<agcn::stream::TaskStream>& streams, std::uint64_t seed,
                    const Variant& v, ContractLog& log) {
  auto cfg = agcn::trainer::benchmark_preset(seed).train;
  cfg.mode = v.mode;
  cfg.ablation = v.ablation;
  const auto r = agcn::trainer::run(streams, cfg, [&](int, const agcn::trainer::Trainer& t) {
    check_boundary(t, streams, log);
  });
  std::size_t total = 0;
  for (const auto& s : streams) total += s.train.size();
  Outcome o;
  o.final_map = r.record.final_map();
  o.forgetting = agcn::trainer::forgetting(r.record, agcn::trainer::Metric::kMap,
                                           static_cast<int>(streams.size()));
  o.single_pass = r.examples_seen == total && r.distinct_examples == total && r.min_touches == 1 &&
                  r.max_touches == 1;
  o.metrics_csv = r.record.metrics_csv();
  o.losses_csv = r.record.losses_csv();
  return o;
}

void benchmark_criteria() {
  const auto t0 = Clock::now();
  const auto streams = agcn::stream::generate_synthetic(agcn::trainer::benchmark_preset(0).data);
  using agcn::trainer::Ablation;
  using agcn::trainer::Mode;
  const std::vector<Variant> variants{
      {"agcn", Mode::kAgcn, Ablation::kNone},
      {"finetune", Mode::kFinetune, Ablation::kNone},
      {"distill-only", Mode::kDistillOnly, Ablation::kNone},
      {"intra-only", Mode::kAgcn, Ablation::kIntraOnly},
  };
  constexpr int kSeeds = 5;
  std::map<std::string, double> map, forget;
  std::map<std::string, double> seconds;
  ContractLog contract;
  int runs = 0, single_pass_runs = 0;
  std::vector<Outcome> agcn_seed0;
  for (const auto& v : variants) {
    const auto v0 = Clock::now();
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const auto o = run_variant(streams, seed, v, contract);
      map[v.name] += o.final_map / kSeeds;
      forget[v.name] += o.forgetting / kSeeds;
      ++runs;
      single_pass_runs += o.single_pass;
      if (seed == 0 && std::string(v.name) == "agcn") agcn_seed0.push_back(o);
    }
    seconds[v.name] = seconds_since(v0);
  }

  report(4, contract.boundaries > 0 && contract.violations == 0,
         "expert snapshot reproduces the live model at " + std::to_string(contract.boundaries) +
             " task boundaries (gph = 0, bit-exact scores); violations: " +
             std::to_string(contract.violations));

  const bool map_up = map["agcn"] > map["finetune"];
  const bool forget_down = forget["agcn"] < forget["finetune"];
  const bool distill_le = map["distill-only"] <= map["agcn"];
  const double t5 = seconds["agcn"] + seconds["finetune"] + seconds["distill-only"];
  report(5, map_up && forget_down && distill_le && t5 < 300.0,
         fmt("mean final mAP agcn %.4f", map["agcn"]) + fmt(" vs finetune %.4f", map["finetune"]) +
             (map_up ? " (ok)" : " (not higher)") + fmt("; forgetting agcn %.4f", forget["agcn"]) +
             fmt(" vs finetune %.4f", forget["finetune"]) + (forget_down ? " (ok)" : " (not lower)") +
             fmt("; distill-only %.4f", map["distill-only"]) +
             (distill_le ? " <= agcn (ok)" : " > agcn") + fmt("; %.1fs", t5));

  const bool intra_le = map["intra-only"] <= map["agcn"];
  const double t6 = seconds["agcn"] + seconds["intra-only"];
  report(6, intra_le && t6 < 300.0,
         fmt("mean final mAP intra-only %.4f", map["intra-only"]) +
             (intra_le ? " <= " : " > ") + fmt("agcn %.4f", map["agcn"]) + fmt("; %.1fs", t6));

  report(7, single_pass_runs == runs,
         "every training example touched exactly once in " + std::to_string(single_pass_runs) +
             "/" + std::to_string(runs) + " benchmark runs");

  // 8: rerun the first configuration and compare the exported records.
  ContractLog unused;
  const auto again = run_variant(streams, 0, variants[0], unused);
  const bool same = !agcn_seed0.empty() && again.metrics_csv == agcn_seed0[0].metrics_csv &&
                    again.losses_csv == agcn_seed0[0].losses_csv;
  report(8, same,
         std::string("repeat benchmark run: metrics and loss CSVs ") +
             (same ? "byte-identical" : "differ") + fmt(" (%.0f bytes)", static_cast<double>(again.metrics_csv.size() + again.losses_csv.size())) +
             fmt("; total benchmark time %.1fs", seconds_since(t0)));
}

}  // namespace

int main() {
  acm_oracle();
  gradient_suite();
  hand_values();
  benchmark_criteria();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
