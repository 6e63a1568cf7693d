#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agcn/acm.hpp"
#include "agcn/backbone.hpp"
#include "agcn/expert.hpp"
#include "agcn/graph.hpp"
#include "agcn/losses.hpp"
#include "agcn/metrics.hpp"
#include "agcn/optim.hpp"
#include "agcn/stream.hpp"

namespace agcn::trainer {

using numerics::Matrix;

enum class Mode {
  kAgcn,         // full objective with expert distillation and graph preservation
  kFinetune,     // classification term only, no expert
  kDistillOnly,  // graph-preservation weight forced to 0
};

enum class Ablation {
  kNone,
  kIntraOnly,  // Old-New and New-Old blocks forced to 0
};

std::string to_string(Mode m);
std::string to_string(Ablation a);
Mode parse_mode(const std::string& s);
Ablation parse_ablation(const std::string& s);

struct TrainConfig {
  losses::LossWeights weights;
  numerics::AdamHyper adam;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;            // model initialisation
  std::uint64_t embedding_seed = 0;  // node inputs
  std::size_t embedding_dim = 16;    // d
  std::size_t graph_hidden = 32;     // d'
  std::size_t feature_dim = 64;      // D
  std::size_t backbone_hidden = 64;
  double threshold = 0.7;
  bool normalize_acm = true;
  double negative_slope = 0.2;
  Mode mode = Mode::kAgcn;
  Ablation ablation = Ablation::kNone;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  /// Weights after applying the mode's overrides.
  losses::LossWeights effective_weights() const;
  bool uses_expert() const noexcept { return mode != Mode::kFinetune; }
  bool intra_only() const noexcept { return ablation == Ablation::kIntraOnly || !uses_expert(); }
};

/// Every settable key, in a stable order.
std::vector<std::string> config_keys();
/// Sets one field from its textual value. Unknown keys and unparsable values
/// raise ConfigError.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
/// Flat `key = value` text; '#' starts a comment. Unknown keys are rejected.
void apply_config_text(TrainConfig& config, const std::string& text);
/// Applies AGCN_<UPPER_KEY> environment variables.
void apply_env_overrides(TrainConfig& config, const std::string& prefix = "AGCN_");
/// Round-trips through apply_config_text.
std::string config_to_text(const TrainConfig& config);

struct LossPoint {
  int task = 0;
  std::size_t step = 0;
  double total = 0.0;
  double cls = 0.0;
  double dst = 0.0;
  double gph = 0.0;
};

/// Metrics recorded at every task boundary.
struct TrainRecord {
  metrics::PerformanceTable map;  // a[l, j] for mAP over task j's classes
  metrics::PerformanceTable cf1;
  metrics::PerformanceTable of1;
  std::vector<metrics::MetricReport> overall;  // after task l, all seen classes
  std::vector<LossPoint> losses;
  std::vector<std::size_t> examples_per_task;

  std::size_t task_count() const noexcept { return overall.size(); }
  double final_map() const;
  std::string metrics_csv() const;
  std::string metrics_json() const;
  std::string losses_csv() const;
};

enum class Metric { kMap, kCf1, kOf1 };

/// F_t for one of the recorded metrics.
double forgetting(const TrainRecord& record, Metric metric, int t);

struct Prediction {
  std::vector<double> probabilities;  // over the seen classes, old first
  stream::ClassSet labels;            // classes with probability > threshold
};

/// sigmoid(AGCN(A, H0) x CNN(x)) and the thresholded label set.
Prediction predict(std::span<const double> x, const backbone::Backbone& b,
                   const graph::GraphModel& g, const Matrix& adjacency,
                   const graph::NodeEmbeddings& h0, double threshold);

/// The minibatch objective and its gradients w.r.t. every trainable weight.
struct StepGradients {
  losses::TotalLoss loss;
  graph::GraphGradients graph;
  backbone::BackboneGradients backbone;
};

/// Evaluates the weighted loss for a batch `x` (B x D_in) with hard labels `y`
/// over the new classes, expert outputs `z` over the old ones, and the stored
/// graph `g_prev`, then backpropagates through sigmoid, the graph head and the
/// backbone. The probability clip is passed straight through, so the gradient
/// is exact whenever no prediction is clipped.
StepGradients objective(const backbone::Backbone& b, const graph::GraphModel& g,
                        const Matrix& adjacency, const Matrix& h0, const Matrix& x,
                        const Matrix& y, const Matrix& z, const Matrix& g_prev,
                        const losses::LossWeights& weights, int task);

/// The single-pass lifelong loop, exposed step by step.
///
/// Call begin_task, then train_batch over the task's stream, then end_task;
/// repeat per task. run() drives this sequence.
class Trainer {
 public:
  Trainer(TrainConfig config, std::size_t input_dim);

  void begin_task(const stream::TaskStream& task);
  /// One optimisation step on a minibatch of the current task. Returns the loss.
  LossPoint train_batch(std::span<const stream::Example> batch);
  /// Freezes A^t, refreshes the expert (unless fine-tuning) and returns A^t.
  const acm::CorrelationMatrix& end_task();

  /// Scores examples over every seen class with the current correlation matrix.
  Matrix score(std::span<const stream::Example> examples) const;
  Prediction predict(std::span<const double> x) const;

  /// A^t from the running statistics (or the frozen one between tasks).
  acm::CorrelationMatrix current_acm() const;
  /// H^t for current_acm().
  Matrix graph_output() const;

  int task() const noexcept { return task_; }
  bool in_task() const noexcept { return in_task_; }
  const TrainConfig& config() const noexcept { return config_; }
  const stream::ClassSet& seen_classes() const noexcept { return embeddings_.class_ids; }
  std::size_t old_class_count() const noexcept { return old_count_; }
  const backbone::Backbone& backbone() const noexcept { return backbone_; }
  const graph::GraphModel& graph_model() const noexcept { return graph_; }
  const graph::NodeEmbeddings& embeddings() const noexcept { return embeddings_; }
  const std::optional<expert::ExpertSnapshot>& expert() const noexcept { return expert_; }
  const std::vector<acm::CorrelationMatrix>& task_acms() const noexcept { return acms_; }
  std::size_t examples_seen() const noexcept { return examples_seen_; }
  const std::unordered_map<std::string, std::uint32_t>& touch_counts() const noexcept {
    return touches_;
  }

  // Test hooks: direct access to the live parameters.
  backbone::Backbone& mutable_backbone() noexcept { return backbone_; }
  graph::GraphModel& mutable_graph_model() noexcept { return graph_; }

 private:
  std::optional<acm::CorrelationMatrix> previous_acm() const;

  TrainConfig config_;
  losses::LossWeights weights_;
  backbone::Backbone backbone_;
  graph::GraphModel graph_;
  graph::NodeEmbeddings embeddings_;

  numerics::AdamState adam_bb_w1_, adam_bb_b1_, adam_bb_w2_, adam_bb_b2_;
  numerics::AdamState adam_g_w1_, adam_g_w2_;

  int task_ = 0;
  bool in_task_ = false;
  stream::ClassSet task_classes_;
  std::size_t old_count_ = 0;
  std::optional<acm::LabelStats> stats_;
  std::vector<acm::CorrelationMatrix> acms_;
  std::optional<expert::ExpertSnapshot> expert_;
  std::size_t step_ = 0;
  std::size_t examples_seen_ = 0;
  std::unordered_map<std::string, std::uint32_t> touches_;
};

struct RunResult {
  TrainRecord record;
  backbone::Backbone backbone;
  graph::GraphModel graph;
  graph::NodeEmbeddings embeddings;
  std::vector<acm::CorrelationMatrix> acms;  // A^t after each task
  std::optional<expert::ExpertSnapshot> expert;
  std::size_t examples_seen = 0;
  std::size_t distinct_examples = 0;  // training ids touched at least once
  std::uint32_t min_touches = 0;
  std::uint32_t max_touches = 0;  // most passes over any single training example
};

/// Called after each task with the task index and the trainer.
using TaskHook = std::function<void(int, const Trainer&)>;

/// Trains over `streams` in order, evaluating every seen task's test set at
/// each task boundary. Throws ConfigError for invalid streams or config and
/// NumericError when the loss stops being finite.
RunResult run(std::span<const stream::TaskStream> streams, const TrainConfig& config,
              const TaskHook& after_task = {});

/// Metrics on one task's test set, restricted to that task's classes.
metrics::MetricReport evaluate_task(const Trainer& trainer, const stream::TaskStream& task);
/// Metrics on the pooled test sets of tasks [0, upto) over every seen class.
metrics::MetricReport evaluate_seen(const Trainer& trainer,
                                    std::span<const stream::TaskStream> streams, std::size_t upto);

/// The bundled desk-scale benchmark: 12 classes, 4 tasks, 32 input features.
/// The data is fixed; `seed` only varies the model's initialisation.
inline constexpr std::uint64_t kBenchmarkDataSeed = 0;

struct Benchmark {
  stream::SyntheticConfig data;
  TrainConfig train;
};
Benchmark benchmark_preset(std::uint64_t seed);

}  // namespace agcn::trainer
