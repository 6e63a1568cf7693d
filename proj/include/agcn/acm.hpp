#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn::acm {

using numerics::Matrix;

/// Running label statistics over the current task's stream.
///
/// Hard-label counts cover the task's new classes; soft sums cover the classes
/// seen before the task and are fed by the expert's sigmoid outputs. Counts only
/// grow; a new task starts from a fresh LabelStats.
class LabelStats {
 public:
  LabelStats(std::size_t new_classes, std::size_t old_classes);

  std::size_t new_count() const noexcept { return class_counts_.size(); }
  std::size_t old_count() const noexcept { return soft_sum_.size(); }
  std::uint64_t examples_seen() const noexcept { return examples_; }

  /// N_ij over new classes; the diagonal holds N_i.
  std::uint64_t pair_count(std::size_t i, std::size_t j) const {
    return pair_counts_[i * new_count() + j];
  }
  std::uint64_t class_count(std::size_t j) const { return class_counts_[j]; }
  double soft_sum(std::size_t i) const { return soft_sum_[i]; }
  /// sum over the stream of z_i * y_j (old i, new j).
  double soft_pair_sum(std::size_t i, std::size_t j) const {
    return soft_pair_sum_[i * new_count() + j];
  }

  /// Accumulates one minibatch. `hard` is B x |new| with {0,1} entries; `soft` is
  /// B x |old| with entries in [0,1] and may be empty when there are no old
  /// classes. Validates the whole batch before touching any accumulator.
  void observe_batch(const Matrix& hard, const Matrix& soft);
  /// Convenience overload for a hard-label-only batch.
  void observe_batch(const Matrix& hard) { observe_batch(hard, Matrix(hard.rows(), 0)); }

 private:
  std::vector<std::uint64_t> pair_counts_;
  std::vector<std::uint64_t> class_counts_;
  std::vector<double> soft_sum_;
  std::vector<double> soft_pair_sum_;
  std::uint64_t examples_ = 0;
};

/// New-New block: B_ij = N_ij / N_j, unit diagonal, zero column when N_j = 0.
Matrix new_new_block(const LabelStats& stats);
/// Old-New block: R_ij = (sum z_i y_j) / N_j, zero when N_j = 0.
Matrix old_new_block(const LabelStats& stats);
/// New-Old block by Bayes' rule: Q_ji = R_ij N_j / sum z_i, zero when sum z_i = 0.
Matrix new_old_block(const LabelStats& stats, const Matrix& r);

/// Augmented correlation matrix over every seen class. Entries are the raw
/// conditionals A_ij = P(C_i | C_j) with a unit diagonal; `boundary` is the
/// number of classes seen before the current task.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(Matrix raw, std::size_t boundary);

  std::size_t size() const noexcept { return raw_.rows(); }
  std::size_t boundary() const noexcept { return boundary_; }
  const Matrix& raw() const noexcept { return raw_; }

  Matrix old_old() const { return raw_.block(0, 0, boundary_, boundary_); }
  Matrix old_new() const { return raw_.block(0, boundary_, boundary_, size() - boundary_); }
  Matrix new_old() const { return raw_.block(boundary_, 0, size() - boundary_, boundary_); }
  Matrix new_new() const {
    return raw_.block(boundary_, boundary_, size() - boundary_, size() - boundary_);
  }

  /// Each row divided by its sum; the form consumed by graph propagation.
  Matrix row_normalized() const;
  /// Row-normalized or raw, per the caller's toggle.
  Matrix graph_view(bool normalize) const { return normalize ? row_normalized() : raw_; }

  friend bool operator==(const CorrelationMatrix&, const CorrelationMatrix&) = default;

 private:
  Matrix raw_;
  std::size_t boundary_ = 0;
};

/// Builds A^t from the frozen previous matrix and the three fresh blocks. With
/// no previous matrix the result is B with a unit diagonal.
CorrelationMatrix assemble(const std::optional<CorrelationMatrix>& prev, const Matrix& b,
                           const Matrix& r, const Matrix& q);

/// One-call assembly from running statistics. `intra_only` zeroes R and Q.
CorrelationMatrix assemble_from_stats(const std::optional<CorrelationMatrix>& prev,
                                      const LabelStats& stats, bool intra_only = false);

// Heatmap exports. Class names label both axes.
std::string to_csv(const CorrelationMatrix& m, std::span<const std::string> class_names);
/// JSON document with the dense matrix and its Old-Old/Old-New/New-Old/New-New
/// blocks. Doubles are written with round-trip precision.
std::string to_json(const CorrelationMatrix& m, std::span<const std::string> class_names,
                    int task);
/// Inverse of to_json; throws DataError on malformed input.
CorrelationMatrix from_json(const std::string& text);

}  // namespace agcn::acm
