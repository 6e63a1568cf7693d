#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn::stream {

using ClassId = std::uint32_t;
using ClassSet = std::vector<ClassId>;

/// One multi-label example. `labels` is sorted and duplicate-free.
struct Example {
  std::string id;
  std::vector<double> features;
  ClassSet labels;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Labels of `labels` that are members of `classes`, in the order of `classes`.
ClassSet restrict_labels(const ClassSet& labels, const ClassSet& classes);

/// Training and test data for one task of the sequence.
///
/// Train examples keep their full label set; only the labels inside `classes`
/// are visible to the learner. Test examples are scored against every seen class.
struct TaskStream {
  int task_id = 1;
  ClassSet classes;
  std::vector<Example> train;
  std::vector<Example> test;

  ClassSet visible_labels(const Example& e) const { return restrict_labels(e.labels, classes); }
  /// Binary indicator vector over `classes`.
  std::vector<double> hard_labels(const Example& e) const;

  friend bool operator==(const TaskStream&, const TaskStream&) = default;
};

/// Checks the cross-task invariants: 1-based consecutive ids, disjoint non-empty
/// class sets, non-empty training streams, non-empty visible labels, and a
/// uniform feature width. Throws ConfigError / DataError.
void validate_streams(std::span<const TaskStream> streams);

/// Union of the class sets of tasks [0, upto), in task order.
ClassSet seen_classes(std::span<const TaskStream> streams, std::size_t upto);

struct TaskSplitCounts {
  std::size_t special = 0;
  std::size_t mixed = 0;
};

struct SplitReport {
  std::vector<TaskSplitCounts> tasks;

  std::size_t total() const;
};

struct SplitResult {
  std::vector<TaskStream> tasks;
  SplitReport report;
};

/// Assigns every example to exactly one task of `partition`.
///
/// Examples whose labels all fall in one cell go to that cell's task. Examples
/// spanning several cells are then handed, in input order, to the currently
/// smallest task whose cell they touch (ties: lowest task id). Throws ConfigError
/// for an empty or overlapping cell and DataError for an example touching no cell.
SplitResult split_dataset(std::span<const Example> examples,
                          const std::vector<ClassSet>& partition);

/// Splits train and test corpora with the same partition; the report describes
/// the training split.
SplitResult split_dataset(std::span<const Example> train, std::span<const Example> test,
                          const std::vector<ClassSet>& partition);

struct SyntheticConfig {
  std::size_t class_count = 12;
  std::size_t task_count = 4;
  /// target(i, j) = desired P(C_i | C_j); the diagonal is ignored.
  numerics::Matrix target;
  std::size_t train_per_task = 1000;
  std::size_t test_per_task = 400;
  std::size_t feature_dim = 32;
  double prototype_scale = 1.0;
  double noise_std = 0.3;
  std::uint64_t seed = 0;
};

/// Even split of class ids 0..class_count-1 into task_count contiguous cells.
std::vector<ClassSet> even_partition(std::size_t class_count, std::size_t task_count);

/// Correlated multi-label streams. Each example has an anchor class drawn from
/// its task; other labels are included independently with probabilities
/// calibrated so the expected pairwise conditionals match `target`. A target of
/// exactly 1 is enforced as a hard implication. Features are the sum of
/// per-label prototypes plus Gaussian noise. Pure in its arguments.
std::vector<TaskStream> generate_synthetic(const SyntheticConfig& config);

/// Correlation structure used by the bundled benchmark preset: a flat background
/// conditional, with each class paired to one class of another task at
/// P = `partner` both ways. Classes left without a partner keep the background.
numerics::Matrix benchmark_target(std::size_t class_count, std::size_t task_count,
                                  double background = 0.03, double partner = 0.9);

// JSON Lines: {"id": str, "features": [float,...], "labels": [int,...]} per line.
std::vector<Example> read_jsonl(std::istream& in);
std::vector<Example> read_jsonl(const std::filesystem::path& path);
void write_jsonl(std::ostream& out, std::span<const Example> examples);
void write_jsonl(const std::filesystem::path& path, std::span<const Example> examples);

}  // namespace agcn::stream
