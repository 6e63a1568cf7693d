#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "agcn/activation.hpp"
#include "agcn/matrix.hpp"

namespace agcn::backbone {

using numerics::Matrix;

/// Trainable feature extractor: D_in -> hidden (activated) -> D (linear).
struct Backbone {
  Matrix w1;  // D_in x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x D
  Matrix b2;  // 1 x D
  Activation act;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t output_dim() const noexcept { return w2.cols(); }

  friend bool operator==(const Backbone&, const Backbone&) = default;
};

Backbone init_backbone(std::size_t input_dim, std::size_t hidden, std::size_t out_dim,
                       std::uint64_t seed, Activation act = {});

struct BackboneForward {
  Matrix input;  // B x D_in
  Matrix pre1;   // B x hidden
  Matrix h1;
  Matrix out;    // B x D
};

/// Batched forward pass; rows of `x` are examples.
BackboneForward forward(const Backbone& b, const Matrix& x);

/// Single-example forward pass.
std::vector<double> extract(const Backbone& b, std::span<const double> x);

struct BackboneGradients {
  Matrix w1;
  Matrix b1;
  Matrix w2;
  Matrix b2;
};

BackboneGradients backward(const Backbone& b, const BackboneForward& cache, const Matrix& d_out);

}  // namespace agcn::backbone
