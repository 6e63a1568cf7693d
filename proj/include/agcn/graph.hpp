#pragma once

#include <cstdint>
#include <span>

#include "agcn/activation.hpp"
#include "agcn/matrix.hpp"
#include "agcn/stream.hpp"

namespace agcn::graph {

using numerics::Matrix;

/// Fixed node inputs H^{t,0}: one unit-norm row per seen class.
///
/// Each row is a pure function of (seed, class id), so extending the class list
/// never changes rows that already exist.
struct NodeEmbeddings {
  stream::ClassSet class_ids;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  Matrix rows;

  /// Appends rows for `more` (which must not already be present).
  void extend(std::span<const stream::ClassId> more);

  friend bool operator==(const NodeEmbeddings&, const NodeEmbeddings&) = default;
};

NodeEmbeddings init_embeddings(std::span<const stream::ClassId> class_ids, std::size_t dim,
                               std::uint64_t seed);

/// The embedding row of a single class.
std::vector<double> embedding_row(stream::ClassId id, std::size_t dim, std::uint64_t seed);

/// Two-layer graph head. Weight shapes do not depend on the class count.
struct GraphModel {
  Matrix w1;  // d x d'
  Matrix w2;  // d' x D
  Activation act;

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t output_dim() const noexcept { return w2.cols(); }

  friend bool operator==(const GraphModel&, const GraphModel&) = default;
};

/// Uniform Glorot initialisation, seeded.
GraphModel init_graph_model(std::size_t dim, std::size_t hidden, std::size_t out_dim,
                            std::uint64_t seed, Activation act = {});

/// Intermediates of one forward pass, kept for the backward pass.
struct GraphForward {
  Matrix a_h0;  // A H0
  Matrix pre1;  // A H0 W1
  Matrix h1;
  Matrix a_h1;  // A H1
  Matrix pre2;  // A H1 W2
  Matrix out;   // H^t, |seen| x D
};

/// H1 = h(A H0 W1); H^t = h(A H1 W2).
GraphForward forward(const Matrix& adjacency, const Matrix& h0, const GraphModel& model);

struct GraphGradients {
  Matrix w1;
  Matrix w2;
};

/// Gradients of a scalar loss w.r.t. W1 and W2 given dLoss/dH^t. The adjacency
/// and node inputs are constants.
GraphGradients backward(const GraphForward& cache, const Matrix& adjacency,
                        const GraphModel& model, const Matrix& d_out);

}  // namespace agcn::graph
