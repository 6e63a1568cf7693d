#include <cstdlib>
#include <numeric>

#include "agcn/errors.hpp"
#include "agcn/trainer.hpp"
#include "doctest.h"
#include "testing.hpp"

namespace tr = agcn::trainer;
using agcn::numerics::Matrix;
using agcn::testing::Gen;

namespace {

double task1_final_map(const std::vector<agcn::stream::TaskStream>& streams, tr::TrainConfig cfg) {
  const auto r = tr::run(streams, cfg);
  return *r.record.map.get(static_cast<int>(streams.size()), 1);
}

struct EnvGuard {
  explicit EnvGuard(const char* name, const char* value) : name(name) { ::setenv(name, value, 1); }
  ~EnvGuard() { ::unsetenv(name); }
  const char* name;
};

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("a single task is plain multi-label training") {
  auto streams = agcn::testing::small_streams(1);
  streams.resize(1);
  const auto r = tr::run(streams, agcn::testing::small_config(1));
  CHECK(r.record.task_count() == 1);
  for (const auto& p : r.record.losses) {
    CHECK(p.task == 1);
    CHECK(p.dst == 0.0);
    CHECK(p.gph == 0.0);
    CHECK(p.total == p.cls);
  }
  CHECK(r.acms.size() == 1);
  CHECK(r.acms[0].boundary() == 0);
}

TEST_CASE("every training example is used exactly once") {
  const auto streams = agcn::testing::small_streams(2);
  for (auto mode : {tr::Mode::kAgcn, tr::Mode::kFinetune, tr::Mode::kDistillOnly}) {
    auto cfg = agcn::testing::small_config(2);
    cfg.mode = mode;
    cfg.batch_size = 7;  // does not divide the stream length
    const auto r = tr::run(streams, cfg);
    std::size_t total = 0;
    for (const auto& s : streams) total += s.train.size();
    CHECK(r.examples_seen == total);
    CHECK(r.distinct_examples == total);
    CHECK(r.min_touches == 1);
    CHECK(r.max_touches == 1);
    CHECK(std::accumulate(r.record.examples_per_task.begin(), r.record.examples_per_task.end(),
                          std::size_t{0}) == total);
  }
}

TEST_CASE("distillation keeps more of task 1 than fine-tuning") {
  // Noise-free features: every label is fully determined by the input.
  double distill = 0.0, finetune = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    agcn::stream::SyntheticConfig c;
    c.class_count = 4;
    c.task_count = 2;
    c.train_per_task = 400;
    c.test_per_task = 200;
    c.feature_dim = 8;
    c.prototype_scale = 2.0;
    c.noise_std = 0.0;
    c.target = agcn::stream::benchmark_target(4, 2, 0.05, 0.5);
    c.seed = 100 + seed;
    const auto streams = agcn::stream::generate_synthetic(c);

    auto cfg = agcn::testing::small_config(seed);
    cfg.mode = tr::Mode::kDistillOnly;
    distill += task1_final_map(streams, cfg);
    cfg.mode = tr::Mode::kFinetune;
    finetune += task1_final_map(streams, cfg);
  }
  CHECK(distill > finetune);
}

TEST_CASE("identical runs give byte-identical records") {
  const auto streams = agcn::testing::small_streams(3);
  const auto cfg = agcn::testing::small_config(4);
  const auto a = tr::run(streams, cfg);
  const auto b = tr::run(streams, cfg);
  CHECK(a.record.metrics_csv() == b.record.metrics_csv());
  CHECK(a.record.losses_csv() == b.record.losses_csv());
  CHECK(a.record.metrics_json() == b.record.metrics_json());
  CHECK(a.backbone == b.backbone);

  auto other = cfg;
  other.seed = 5;
  CHECK(tr::run(streams, other).record.losses_csv() != a.record.losses_csv());
}

TEST_CASE("correlation matrices: frozen old block, ablation and fine-tuning") {
  const auto streams = agcn::testing::small_streams(5);
  const auto full = tr::run(streams, agcn::testing::small_config(6));
  REQUIRE(full.acms.size() == 3);
  for (std::size_t t = 1; t < full.acms.size(); ++t) {
    CHECK(full.acms[t].old_old() == full.acms[t - 1].raw());
    CHECK(full.acms[t].boundary() == full.acms[t - 1].size());
    CHECK(full.acms[t].size() > full.acms[t - 1].size());
  }
  CHECK(full.acms[1].old_new() != Matrix(2, 2));

  auto cfg = agcn::testing::small_config(6);
  cfg.ablation = tr::Ablation::kIntraOnly;
  const auto intra = tr::run(streams, cfg);
  for (std::size_t t = 1; t < intra.acms.size(); ++t) {
    const auto& a = intra.acms[t];
    CHECK(a.old_new() == Matrix(a.boundary(), a.size() - a.boundary()));
    CHECK(a.new_old() == Matrix(a.size() - a.boundary(), a.boundary()));
  }

  cfg = agcn::testing::small_config(6);
  cfg.mode = tr::Mode::kFinetune;
  const auto ft = tr::run(streams, cfg);
  CHECK_FALSE(ft.expert.has_value());
  CHECK(ft.acms[1].old_new() == Matrix(2, 2));
  for (const auto& p : ft.record.losses) {
    CHECK(p.dst == 0.0);
    CHECK(p.gph == 0.0);
  }
  CHECK(cfg.effective_weights().cls == 1.0);
  CHECK(cfg.effective_weights().dst == 0.0);
  CHECK(cfg.effective_weights().gph == 0.0);
  cfg.mode = tr::Mode::kDistillOnly;
  CHECK(cfg.effective_weights().gph == 0.0);
  CHECK(cfg.effective_weights().dst == 0.93);
}

TEST_CASE("ground truth only reaches the new-class logits") {
  Gen g(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n_old = g.between(1, 3), n_new = g.between(1, 3), batch = g.between(1, 5);
    const auto b = agcn::backbone::init_backbone(4, 5, 3, rep);
    const auto gm = agcn::graph::init_graph_model(2, 4, 3, rep);
    const Matrix a = agcn::testing::random_adjacency(g, n_old + n_new);
    const Matrix h0 = g.matrix(n_old + n_new, 2);
    const Matrix x = g.matrix(batch, 4);
    const Matrix z = g.matrix(batch, n_old, 0, 1);
    const Matrix gp = g.matrix(n_old, 3);
    const Matrix y1 = g.binary(batch, n_new, 0.5);
    const Matrix y2 = g.binary(batch, n_new, 0.5);
    const agcn::losses::LossWeights w;
    const auto s1 = tr::objective(b, gm, a, h0, x, y1, z, gp, w, 2);
    const auto s2 = tr::objective(b, gm, a, h0, x, y2, z, gp, w, 2);
    // Changing y moves nothing in the old columns.
    CHECK(s1.loss.d_logits.block(0, 0, batch, n_old) == s2.loss.d_logits.block(0, 0, batch, n_old));

    const agcn::losses::LossWeights cls_only{1, 0, 0};
    const auto s3 = tr::objective(b, gm, a, h0, x, y1, z, gp, cls_only, 2);
    CHECK(s3.loss.d_logits.block(0, 0, batch, n_old) == Matrix(batch, n_old));
  }
}

TEST_CASE("predict: shapes, zero weights and thresholds") {
  const auto streams = agcn::testing::small_streams(8);
  auto cfg = agcn::testing::small_config(8);
  tr::Trainer t(cfg, 8);
  std::size_t seen = 0;
  for (const auto& s : streams) {
    agcn::testing::train_task(t, s);
    t.end_task();
    seen += s.classes.size();
    CHECK(t.predict(s.test[0].features).probabilities.size() == seen);
  }

  t.mutable_backbone().w2 *= 0.0;
  t.mutable_backbone().b2 *= 0.0;
  const auto p = t.predict(streams[0].test[0].features);
  for (double v : p.probabilities) CHECK(v == 0.5);
  CHECK(p.labels.empty());

  const auto all = tr::predict(streams[0].test[0].features, t.backbone(), t.graph_model(),
                               t.current_acm().row_normalized(), t.embeddings(), 0.0);
  CHECK(all.labels == t.seen_classes());
}

TEST_CASE("run rejects broken inputs and non-finite losses") {
  auto streams = agcn::testing::small_streams(9);
  auto bad = streams;
  bad[1].classes = bad[0].classes;
  CHECK_THROWS_AS(tr::run(bad, agcn::testing::small_config(1)), agcn::ConfigError);
  bad = streams;
  bad[2].train.clear();
  CHECK_THROWS_AS(tr::run(bad, agcn::testing::small_config(1)), agcn::ConfigError);
  bad = streams;
  bad[1].test.clear();
  CHECK_THROWS_AS(tr::run(bad, agcn::testing::small_config(1)), agcn::ConfigError);

  tr::Trainer t(agcn::testing::small_config(1), 8);
  t.begin_task(streams[0]);
  for (double& v : t.mutable_backbone().w1.data()) v = std::nan("");
  CHECK_THROWS_AS(t.train_batch(std::span(streams[0].train).first(4)), agcn::NumericError);

  auto cfg = agcn::testing::small_config(1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), agcn::ConfigError);
  cfg = agcn::testing::small_config(1);
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), agcn::ConfigError);
}

TEST_CASE("forgetting helper reads the recorded table") {
  const auto streams = agcn::testing::small_streams(10);
  const auto r = tr::run(streams, agcn::testing::small_config(10));
  for (int t = 2; t <= 3; ++t) {
    CHECK(tr::forgetting(r.record, tr::Metric::kMap, t) == agcn::metrics::forgetting(r.record.map, t));
    CHECK(tr::forgetting(r.record, tr::Metric::kCf1, t) == agcn::metrics::forgetting(r.record.cf1, t));
  }
  CHECK(r.record.final_map() == *r.record.overall.back().mean_ap);
  CHECK(r.record.metrics_csv().rfind("after_task,eval_task,mAP,CF1,OF1\n", 0) == 0);
  CHECK(r.record.losses_csv().rfind("task,step,total,cls,dst,gph\n", 0) == 0);
}

TEST_CASE("config text round trip, errors and environment overrides") {
  tr::TrainConfig c;
  c.weights.gph = 12.5;
  c.adam.learning_rate = 0.003;
  c.batch_size = 9;
  c.seed = 18446744073709551615ULL;
  c.normalize_acm = false;
  c.mode = tr::Mode::kDistillOnly;
  c.ablation = tr::Ablation::kIntraOnly;
  c.threshold = 1.0 / 3.0;
  tr::TrainConfig back;
  tr::apply_config_text(back, tr::config_to_text(c));
  CHECK(tr::config_to_text(back) == tr::config_to_text(c));
  CHECK(back.threshold == c.threshold);
  CHECK(back.seed == c.seed);

  // Every key appears in the text form.
  const auto text = tr::config_to_text(c);
  for (const auto& key : tr::config_keys()) CHECK(text.find(key + " = ") != std::string::npos);

  tr::TrainConfig d;
  tr::apply_config_text(d, "# comment\n\n  batch_size = 4   # trailing\nmode = finetune\n");
  CHECK(d.batch_size == 4);
  CHECK(d.mode == tr::Mode::kFinetune);
  CHECK_THROWS_AS(tr::apply_config_text(d, "no_such_key = 1\n"), agcn::ConfigError);
  CHECK_THROWS_AS(tr::apply_config_text(d, "batch_size = many\n"), agcn::ConfigError);
  CHECK_THROWS_AS(tr::apply_config_text(d, "batch_size = -3\n"), agcn::ConfigError);
  CHECK_THROWS_AS(tr::apply_config_text(d, "just words\n"), agcn::ConfigError);
  CHECK_THROWS_AS(tr::apply_config_text(d, "mode = sideways\n"), agcn::ConfigError);
  CHECK_THROWS_AS(tr::apply_config_text(d, "normalize_acm = maybe\n"), agcn::ConfigError);

  {
    EnvGuard lr("AGCN_LEARNING_RATE", "0.25");
    EnvGuard mode("AGCN_ABLATION", "intra-only");
    tr::TrainConfig e;
    tr::apply_env_overrides(e);
    CHECK(e.adam.learning_rate == 0.25);
    CHECK(e.ablation == tr::Ablation::kIntraOnly);
    tr::TrainConfig f;
    tr::apply_env_overrides(f, "OTHER_");
    CHECK(f.adam.learning_rate == tr::TrainConfig{}.adam.learning_rate);
  }
  {
    EnvGuard bad("AGCN_BATCH_SIZE", "zero");
    tr::TrainConfig e;
    CHECK_THROWS_AS(tr::apply_env_overrides(e), agcn::ConfigError);
  }
}

TEST_CASE("benchmark preset") {
  const auto a = tr::benchmark_preset(0);
  const auto b = tr::benchmark_preset(1);
  CHECK(a.data.seed == tr::kBenchmarkDataSeed);
  CHECK(b.data.seed == tr::kBenchmarkDataSeed);
  CHECK(a.train.seed != b.train.seed);
  CHECK(a.data.class_count == 12);
  CHECK(a.data.task_count == 4);
  CHECK(a.data.feature_dim == 32);
  CHECK(a.data.train_per_task == 1000);
  CHECK(a.data.test_per_task == 400);
  CHECK(a.train.weights.cls == 0.07);
  CHECK(a.train.weights.dst == 0.93);
  CHECK(a.train.weights.gph == 1e5);
}

}  // TEST_SUITE
