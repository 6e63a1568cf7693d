#include "agcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcn/errors.hpp"
#include "agcn/keyvalue.hpp"
#include "agcn/random.hpp"

namespace agcn::trainer {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kAgcn: return "agcn";
    case Mode::kFinetune: return "finetune";
    case Mode::kDistillOnly: return "distill-only";
  }
  return "?";
}

std::string to_string(Ablation a) { return a == Ablation::kNone ? "none" : "intra-only"; }

Mode parse_mode(const std::string& s) {
  if (s == "agcn") return Mode::kAgcn;
  if (s == "finetune") return Mode::kFinetune;
  if (s == "distill-only") return Mode::kDistillOnly;
  throw ConfigError("unknown mode '" + s + "' (expected agcn, finetune or distill-only)");
}

Ablation parse_ablation(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "intra-only") return Ablation::kIntraOnly;
  throw ConfigError("unknown ablation '" + s + "' (expected none or intra-only)");
}

void TrainConfig::validate() const {
  weights.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (embedding_dim == 0 || graph_hidden == 0 || feature_dim == 0 || backbone_hidden == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (!std::isfinite(negative_slope)) throw ConfigError("negative_slope must be finite");
}

losses::LossWeights TrainConfig::effective_weights() const {
  switch (mode) {
    case Mode::kFinetune: return {1.0, 0.0, 0.0};
    case Mode::kDistillOnly: return {weights.cls, weights.dst, 0.0};
    case Mode::kAgcn: break;
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Flat key/value configuration

using kv::parse_bool;
using kv::parse_double;
using kv::parse_uint;
using kv::trim;

namespace {
std::string fmt(double v) { return kv::format_double(v); }
}  // namespace

std::vector<std::string> config_keys() {
  return {"lambda_cls",     "lambda_dst",    "lambda_gph",      "learning_rate",
          "adam_beta1",     "adam_beta2",    "adam_epsilon",    "batch_size",
          "seed",           "embedding_seed", "embedding_dim",  "graph_hidden",
          "feature_dim",    "backbone_hidden", "threshold",     "normalize_acm",
          "negative_slope", "mode",          "ablation"};
}

void apply_setting(TrainConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "lambda_cls") c.weights.cls = parse_double(key, v);
  else if (key == "lambda_dst") c.weights.dst = parse_double(key, v);
  else if (key == "lambda_gph") c.weights.gph = parse_double(key, v);
  else if (key == "learning_rate") c.adam.learning_rate = parse_double(key, v);
  else if (key == "adam_beta1") c.adam.beta1 = parse_double(key, v);
  else if (key == "adam_beta2") c.adam.beta2 = parse_double(key, v);
  else if (key == "adam_epsilon") c.adam.epsilon = parse_double(key, v);
  else if (key == "batch_size") c.batch_size = parse_uint(key, v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "embedding_seed") c.embedding_seed = parse_uint(key, v);
  else if (key == "embedding_dim") c.embedding_dim = parse_uint(key, v);
  else if (key == "graph_hidden") c.graph_hidden = parse_uint(key, v);
  else if (key == "feature_dim") c.feature_dim = parse_uint(key, v);
  else if (key == "backbone_hidden") c.backbone_hidden = parse_uint(key, v);
  else if (key == "threshold") c.threshold = parse_double(key, v);
  else if (key == "normalize_acm") c.normalize_acm = parse_bool(key, v);
  else if (key == "negative_slope") c.negative_slope = parse_double(key, v);
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "ablation") c.ablation = parse_ablation(v);
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& c, const std::string& text) {
  kv::for_each_entry(text, [&](const std::string& k, const std::string& v) { apply_setting(c, k, v); });
}

void apply_env_overrides(TrainConfig& c, const std::string& prefix) {
  for (const auto& key : config_keys()) {
    if (const char* v = std::getenv(kv::env_name(prefix, key).c_str())) apply_setting(c, key, v);
  }
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "lambda_cls = " << fmt(c.weights.cls) << '\n'
      << "lambda_dst = " << fmt(c.weights.dst) << '\n'
      << "lambda_gph = " << fmt(c.weights.gph) << '\n'
      << "learning_rate = " << fmt(c.adam.learning_rate) << '\n'
      << "adam_beta1 = " << fmt(c.adam.beta1) << '\n'
      << "adam_beta2 = " << fmt(c.adam.beta2) << '\n'
      << "adam_epsilon = " << fmt(c.adam.epsilon) << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "seed = " << c.seed << '\n'
      << "embedding_seed = " << c.embedding_seed << '\n'
      << "embedding_dim = " << c.embedding_dim << '\n'
      << "graph_hidden = " << c.graph_hidden << '\n'
      << "feature_dim = " << c.feature_dim << '\n'
      << "backbone_hidden = " << c.backbone_hidden << '\n'
      << "threshold = " << fmt(c.threshold) << '\n'
      << "normalize_acm = " << (c.normalize_acm ? "true" : "false") << '\n'
      << "negative_slope = " << fmt(c.negative_slope) << '\n'
      << "mode = " << to_string(c.mode) << '\n'
      << "ablation = " << to_string(c.ablation) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Records

double TrainRecord::final_map() const {
  if (overall.empty() || !overall.back().mean_ap) throw DataError("TrainRecord: no final mAP");
  return *overall.back().mean_ap;
}

std::string TrainRecord::metrics_csv() const {
  std::ostringstream out;
  out << "after_task,eval_task,mAP,CF1,OF1\n";
  for (std::size_t l = 1; l <= task_count(); ++l) {
    const int li = static_cast<int>(l);
    for (int j = 1; j <= li; ++j) {
      out << l << ',' << j << ',' << fmt(*map.get(li, j)) << ',' << fmt(*cf1.get(li, j)) << ','
          << fmt(*of1.get(li, j)) << '\n';
    }
    const auto& r = overall[l - 1];
    out << l << ",all," << fmt(r.mean_ap.value_or(0.0)) << ',' << fmt(r.per_class_f1) << ','
        << fmt(r.overall_f1) << '\n';
  }
  return out.str();
}

std::string TrainRecord::metrics_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_task = nlohmann::ordered_json::array();
  for (const auto& [key, v] : map.entries()) {
    per_task.push_back({{"after_task", key.first},
                        {"eval_task", key.second},
                        {"mAP", v},
                        {"CF1", *cf1.get(key.first, key.second)},
                        {"OF1", *of1.get(key.first, key.second)}});
  }
  j["per_task"] = per_task;
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < overall.size(); ++l) {
    all.push_back(nlohmann::ordered_json::parse(metrics::report_json(overall[l])));
    all.back()["after_task"] = l + 1;
  }
  j["overall"] = all;
  j["examples_per_task"] = examples_per_task;
  return j.dump(1);
}

std::string TrainRecord::losses_csv() const {
  std::ostringstream out;
  out << "task,step,total,cls,dst,gph\n";
  for (const auto& p : losses) {
    out << p.task << ',' << p.step << ',' << fmt(p.total) << ',' << fmt(p.cls) << ','
        << fmt(p.dst) << ',' << fmt(p.gph) << '\n';
  }
  return out.str();
}

double forgetting(const TrainRecord& record, Metric metric, int t) {
  switch (metric) {
    case Metric::kMap: return metrics::forgetting(record.map, t);
    case Metric::kCf1: return metrics::forgetting(record.cf1, t);
    case Metric::kOf1: return metrics::forgetting(record.of1, t);
  }
  throw DataError("unknown metric");
}

Prediction predict(std::span<const double> x, const backbone::Backbone& b,
                   const graph::GraphModel& g, const Matrix& adjacency,
                   const graph::NodeEmbeddings& h0, double threshold) {
  const Matrix h = graph::forward(adjacency, h0.rows, g).out;
  const auto f = backbone::extract(b, x);
  const Matrix probs = expert::predict_probabilities(h, Matrix(1, f.size(), f));
  Prediction p;
  p.probabilities = probs.values();
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    if (p.probabilities[i] > threshold) p.labels.push_back(h0.class_ids[i]);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Trainer

StepGradients objective(const backbone::Backbone& b, const graph::GraphModel& g,
                        const Matrix& adjacency, const Matrix& h0, const Matrix& x,
                        const Matrix& y, const Matrix& z, const Matrix& g_prev,
                        const losses::LossWeights& weights, int task) {
  const graph::GraphForward gf = graph::forward(adjacency, h0, g);
  const backbone::BackboneForward bf = backbone::forward(b, x);

  Matrix y_hat = numerics::matmul_nt(bf.out, gf.out);
  for (double& v : y_hat.data()) v = numerics::sigmoid(v);

  StepGradients out;
  if (!y_hat.all_finite() || !gf.out.all_finite()) {
    out.loss.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.loss = losses::total_loss(weights, y, y_hat, z, g_prev, gf.out, task);
  if (!std::isfinite(out.loss.value)) return out;

  Matrix d_h = numerics::matmul_tn(out.loss.d_logits, bf.out);
  d_h += out.loss.d_h;
  const Matrix d_f = numerics::matmul(out.loss.d_logits, gf.out);
  out.graph = graph::backward(gf, adjacency, g, d_h);
  out.backbone = backbone::backward(b, bf, d_f);
  return out;
}

Trainer::Trainer(TrainConfig config, std::size_t input_dim) : config_(std::move(config)) {
  config_.validate();
  if (input_dim == 0) throw ConfigError("input feature dimension must be positive");
  weights_ = config_.effective_weights();
  const Activation act{config_.negative_slope};
  backbone_ = backbone::init_backbone(input_dim, config_.backbone_hidden, config_.feature_dim,
                                      config_.seed, act);
  graph_ = graph::init_graph_model(config_.embedding_dim, config_.graph_hidden,
                                   config_.feature_dim, config_.seed, act);
  embeddings_ = graph::init_embeddings({}, config_.embedding_dim, config_.embedding_seed);
  adam_bb_w1_ = numerics::AdamState(backbone_.w1, config_.adam);
  adam_bb_b1_ = numerics::AdamState(backbone_.b1, config_.adam);
  adam_bb_w2_ = numerics::AdamState(backbone_.w2, config_.adam);
  adam_bb_b2_ = numerics::AdamState(backbone_.b2, config_.adam);
  adam_g_w1_ = numerics::AdamState(graph_.w1, config_.adam);
  adam_g_w2_ = numerics::AdamState(graph_.w2, config_.adam);
}

std::optional<acm::CorrelationMatrix> Trainer::previous_acm() const {
  if (acms_.empty()) return std::nullopt;
  return acms_.back();
}

void Trainer::begin_task(const stream::TaskStream& task) {
  if (in_task_) throw ConfigError("begin_task: task " + std::to_string(task_) + " is still open");
  if (task.task_id != task_ + 1) {
    throw ConfigError("begin_task: expected task " + std::to_string(task_ + 1) + ", got " +
                      std::to_string(task.task_id));
  }
  if (task.classes.empty()) throw ConfigError("begin_task: empty class set");
  for (auto c : task.classes) {
    if (std::find(seen_classes().begin(), seen_classes().end(), c) != seen_classes().end()) {
      throw ConfigError("begin_task: class " + std::to_string(c) + " overlaps an earlier task");
    }
  }
  task_ = task.task_id;
  in_task_ = true;
  task_classes_ = task.classes;
  old_count_ = embeddings_.class_ids.size();
  embeddings_.extend(task.classes);
  stats_.emplace(task_classes_.size(), old_count_);
}

LossPoint Trainer::train_batch(std::span<const stream::Example> batch) {
  if (!in_task_) throw ConfigError("train_batch called outside a task");
  if (batch.empty()) throw ConfigError("train_batch: empty batch");
  const std::size_t n_batch = batch.size();
  const std::size_t n_new = task_classes_.size();
  const std::size_t d_in = backbone_.input_dim();

  Matrix x(n_batch, d_in);
  Matrix y(n_batch, n_new);
  for (std::size_t b = 0; b < n_batch; ++b) {
    const auto& e = batch[b];
    if (e.features.size() != d_in) {
      throw ShapeError("example '" + e.id + "' has " + std::to_string(e.features.size()) +
                       " features, expected " + std::to_string(d_in));
    }
    std::copy(e.features.begin(), e.features.end(), x.row(b).begin());
    for (std::size_t j = 0; j < n_new; ++j) {
      if (std::binary_search(e.labels.begin(), e.labels.end(), task_classes_[j])) y(b, j) = 1.0;
    }
  }

  const bool with_expert = task_ > 1 && config_.uses_expert();
  Matrix z = with_expert ? expert_->soft_labels(x) : Matrix(n_batch, old_count_);
  stats_->observe_batch(y, z);

  const acm::CorrelationMatrix a =
      acm::assemble_from_stats(previous_acm(), *stats_, config_.intra_only());
  const Matrix no_graph(0, graph_.output_dim());
  const StepGradients step =
      objective(backbone_, graph_, a.graph_view(config_.normalize_acm), embeddings_.rows, x, y, z,
                with_expert ? expert_->stored_graph() : no_graph, weights_, task_);
  const auto& loss = step.loss;
  if (!std::isfinite(loss.value)) {
    throw NumericError("non-finite loss at task " + std::to_string(task_) + ", step " +
                       std::to_string(step_));
  }
  const auto& gg = step.graph;
  const auto& bg = step.backbone;

  numerics::adam_step(graph_.w1, gg.w1, adam_g_w1_);
  numerics::adam_step(graph_.w2, gg.w2, adam_g_w2_);
  numerics::adam_step(backbone_.w1, bg.w1, adam_bb_w1_);
  numerics::adam_step(backbone_.b1, bg.b1, adam_bb_b1_);
  numerics::adam_step(backbone_.w2, bg.w2, adam_bb_w2_);
  numerics::adam_step(backbone_.b2, bg.b2, adam_bb_b2_);
  if (!graph_.w1.all_finite() || !graph_.w2.all_finite() || !backbone_.w1.all_finite() ||
      !backbone_.w2.all_finite()) {
    throw NumericError("non-finite parameters after step " + std::to_string(step_));
  }

  examples_seen_ += n_batch;
  for (const auto& e : batch) touches_[e.id] += 1;
  // Without an expert there are no old targets, so the old-class terms are not reported.
  return LossPoint{task_, step_++, loss.value, loss.cls, with_expert ? loss.dst : 0.0,
                   with_expert ? loss.gph : 0.0};
}

const acm::CorrelationMatrix& Trainer::end_task() {
  if (!in_task_) throw ConfigError("end_task called outside a task");
  acms_.push_back(acm::assemble_from_stats(previous_acm(), *stats_, config_.intra_only()));
  stats_.reset();
  in_task_ = false;
  if (config_.uses_expert()) {
    expert_ = expert::ExpertSnapshot::take(backbone_, graph_, acms_.back(), embeddings_, task_,
                                           config_.normalize_acm);
  }
  return acms_.back();
}

acm::CorrelationMatrix Trainer::current_acm() const {
  if (in_task_) return acm::assemble_from_stats(previous_acm(), *stats_, config_.intra_only());
  if (acms_.empty()) throw ConfigError("no correlation matrix before the first task");
  return acms_.back();
}

Matrix Trainer::graph_output() const {
  return graph::forward(current_acm().graph_view(config_.normalize_acm), embeddings_.rows, graph_)
      .out;
}

Matrix Trainer::score(std::span<const stream::Example> examples) const {
  Matrix x(examples.size(), backbone_.input_dim());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].features.size() != x.cols()) {
      throw ShapeError("example '" + examples[i].id + "' has the wrong feature length");
    }
    std::copy(examples[i].features.begin(), examples[i].features.end(), x.row(i).begin());
  }
  return expert::predict_probabilities(graph_output(), backbone::forward(backbone_, x).out);
}

Prediction Trainer::predict(std::span<const double> x) const {
  return trainer::predict(x, backbone_, graph_, current_acm().graph_view(config_.normalize_acm),
                          embeddings_, config_.threshold);
}

// ---------------------------------------------------------------------------
// Evaluation and the full loop

namespace {

metrics::MetricReport evaluate_over(const Trainer& trainer,
                                    std::span<const stream::Example> examples,
                                    const stream::ClassSet& classes) {
  const Matrix all = trainer.score(examples);
  const auto& seen = trainer.seen_classes();
  std::vector<std::size_t> cols;
  for (auto c : classes) {
    auto it = std::find(seen.begin(), seen.end(), c);
    if (it == seen.end()) throw DataError("evaluation class " + std::to_string(c) + " is unseen");
    cols.push_back(static_cast<std::size_t>(it - seen.begin()));
  }
  metrics::EvalBatch batch;
  batch.threshold = trainer.config().threshold;
  batch.scores = Matrix(examples.size(), cols.size());
  batch.truth = Matrix(examples.size(), cols.size());
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& labels = examples[e].labels;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      batch.scores(e, k) = all(e, cols[k]);
      batch.truth(e, k) = std::binary_search(labels.begin(), labels.end(), classes[k]) ? 1.0 : 0.0;
    }
  }
  return metrics::evaluate(batch);
}

}  // namespace

metrics::MetricReport evaluate_task(const Trainer& trainer, const stream::TaskStream& task) {
  return evaluate_over(trainer, task.test, task.classes);
}

metrics::MetricReport evaluate_seen(const Trainer& trainer,
                                    std::span<const stream::TaskStream> streams, std::size_t upto) {
  std::vector<stream::Example> pooled;
  for (std::size_t t = 0; t < upto; ++t)
    pooled.insert(pooled.end(), streams[t].test.begin(), streams[t].test.end());
  return evaluate_over(trainer, pooled, stream::seen_classes(streams, upto));
}

RunResult run(std::span<const stream::TaskStream> streams, const TrainConfig& config,
              const TaskHook& after_task) {
  stream::validate_streams(streams);
  for (const auto& s : streams) {
    if (s.test.empty()) throw ConfigError("task " + std::to_string(s.task_id) + " has no test set");
  }
  Trainer trainer(config, streams.front().train.front().features.size());
  RunResult result;

  for (std::size_t t = 0; t < streams.size(); ++t) {
    const auto& task = streams[t];
    trainer.begin_task(task);
    const std::size_t before = trainer.examples_seen();
    std::span<const stream::Example> rest(task.train);
    while (!rest.empty()) {
      const std::size_t n = std::min(config.batch_size, rest.size());
      result.record.losses.push_back(trainer.train_batch(rest.first(n)));
      rest = rest.subspan(n);
    }
    result.record.examples_per_task.push_back(trainer.examples_seen() - before);
    trainer.end_task();

    const int l = static_cast<int>(t + 1);
    for (std::size_t j = 0; j <= t; ++j) {
      const auto r = evaluate_task(trainer, streams[j]);
      const int ji = static_cast<int>(j + 1);
      result.record.map.record(l, ji, *r.mean_ap);
      result.record.cf1.record(l, ji, r.per_class_f1);
      result.record.of1.record(l, ji, r.overall_f1);
    }
    result.record.overall.push_back(evaluate_seen(trainer, streams, t + 1));
    if (after_task) after_task(l, trainer);
  }

  result.backbone = trainer.backbone();
  result.graph = trainer.graph_model();
  result.embeddings = trainer.embeddings();
  result.acms = trainer.task_acms();
  result.expert = trainer.expert();
  result.examples_seen = trainer.examples_seen();
  result.distinct_examples = trainer.touch_counts().size();
  bool first = true;
  for (const auto& [id, n] : trainer.touch_counts()) {
    result.max_touches = std::max(result.max_touches, n);
    result.min_touches = first ? n : std::min(result.min_touches, n);
    first = false;
  }
  return result;
}

Benchmark benchmark_preset(std::uint64_t seed) {
  Benchmark b;
  b.data.class_count = 12;
  b.data.task_count = 4;
  b.data.target = stream::benchmark_target(12, 4);
  b.data.train_per_task = 1000;
  b.data.test_per_task = 400;
  b.data.feature_dim = 32;
  b.data.prototype_scale = 0.6;
  b.data.noise_std = 0.3;
  b.data.seed = kBenchmarkDataSeed;
  b.train.seed = mix_seed(seed, 1);
  b.train.embedding_seed = mix_seed(seed, 2);
  b.train.adam.learning_rate = 1e-2;
  return b;
}

}  // namespace agcn::trainer
