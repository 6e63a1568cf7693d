#pragma once

#include <span>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn::losses {

using numerics::Matrix;

inline constexpr double kProbFloor = 1e-7;

/// Clamp to [1e-7, 1 - 1e-7]; throws DomainError for NaN or values outside [0,1].
double clip_probability(double p);

struct LossWeights {
  double cls = 0.07;
  double dst = 0.93;
  double gph = 1e5;

  /// Throws ConfigError if any weight is negative or non-finite.
  void validate() const;
};

struct VectorLoss {
  double value = 0.0;
  std::vector<double> grad;  // d value / d prediction
};

/// Summed binary cross-entropy of hard targets y in {0,1}.
VectorLoss cls_loss(std::span<const double> y, std::span<const double> y_hat_new);

/// Summed soft-target cross-entropy against expert outputs z in [0,1].
VectorLoss dst_loss(std::span<const double> z, std::span<const double> y_hat_old);

struct GraphLoss {
  double value = 0.0;
  Matrix grad;  // same shape as H; rows past the old boundary are zero
};

/// Sum over the rows of `g_prev` of ||G_i - H_i||^2. H may have extra rows.
GraphLoss gph_loss(const Matrix& g_prev, const Matrix& h);

/// Minibatch objective. `y` is B x |new|, `y_hat` is B x |seen| laid out as
/// [old | new], `z` is B x |old|. Cross-entropy terms are averaged over the batch;
/// the graph term is not. Task 1 uses the classification term alone, unweighted.
struct TotalLoss {
  double value = 0.0;
  double cls = 0.0;  // batch mean of cls_loss
  double dst = 0.0;  // batch mean of dst_loss
  double gph = 0.0;
  Matrix d_pred;     // d value / d y_hat (through the clipped probabilities)
  Matrix d_logits;   // d value / d logits with y_hat = sigmoid(logits), clip passed straight through
  Matrix d_h;        // direct d value / d H from the graph term (logit paths excluded)
};

TotalLoss total_loss(const LossWeights& w, const Matrix& y, const Matrix& y_hat, const Matrix& z,
                     const Matrix& g_prev, const Matrix& h, int task);

}  // namespace agcn::losses
