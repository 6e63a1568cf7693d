#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn::numerics {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-4;
};

/// Moment buffers and step counter for one parameter tensor.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamHyper hyper = {});
  explicit AdamState(const Matrix& like, AdamHyper hyper = {})
      : AdamState(like.rows(), like.cols(), hyper) {}

  const Matrix& first_moment() const noexcept { return m_; }
  const Matrix& second_moment() const noexcept { return v_; }
  std::uint64_t step() const noexcept { return step_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }

  friend void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

 private:
  Matrix m_;
  Matrix v_;
  std::uint64_t step_ = 0;
  AdamHyper hyper_;
};

/// Bias-corrected Adam update, applied in place. Increments the step counter.
/// A gradient that is zero everywhere leaves `param` unchanged.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

using ScalarFn = std::function<double(std::span<const double>)>;

/// Max over coordinates of |central difference - analytic| / max(1, |analytic|).
/// Throws NumericError if any evaluation of `f` is non-finite.
double finite_diff_check(const ScalarFn& f, std::span<const double> params,
                         std::span<const double> analytic_grad, double h = 1e-5);

}  // namespace agcn::numerics
