#pragma once

#include <span>
#include <string>
#include <vector>

#include "agcn/acm.hpp"
#include "agcn/backbone.hpp"
#include "agcn/checkpoint.hpp"
#include "agcn/graph.hpp"

namespace agcn::expert {

using numerics::Matrix;

/// Frozen copy of the model taken at the end of a task.
///
/// Produces the soft labels z over the classes seen up to that task and the
/// stored node representations G = AGCN_xpt(A, H0), computed once at creation.
class ExpertSnapshot {
 public:
  /// Deep-copies every input. `normalize` selects the adjacency view used by the
  /// graph head and must match the live model's setting.
  static ExpertSnapshot take(const backbone::Backbone& b, const graph::GraphModel& g,
                             const acm::CorrelationMatrix& a, const graph::NodeEmbeddings& h0,
                             int task, bool normalize);

  int task() const noexcept { return task_; }
  std::size_t class_count() const noexcept { return stored_.rows(); }
  const backbone::Backbone& backbone() const noexcept { return backbone_; }
  const graph::GraphModel& graph_model() const noexcept { return graph_; }
  const acm::CorrelationMatrix& correlation() const noexcept { return acm_; }
  const graph::NodeEmbeddings& embeddings() const noexcept { return h0_; }
  bool normalized() const noexcept { return normalize_; }

  /// G: |seen| x D.
  const Matrix& stored_graph() const noexcept { return stored_; }

  /// sigmoid(G f(x)) for one example.
  std::vector<double> soft_labels(std::span<const double> x) const;
  /// Batched form; rows of `x` are examples. Returns B x |seen|.
  Matrix soft_labels(const Matrix& x) const;

  checkpoint::Bundle to_bundle() const;
  static ExpertSnapshot from_bundle(const checkpoint::Bundle& bundle);

  friend bool operator==(const ExpertSnapshot&, const ExpertSnapshot&) = default;

 private:
  ExpertSnapshot() = default;

  backbone::Backbone backbone_;
  graph::GraphModel graph_;
  acm::CorrelationMatrix acm_;
  graph::NodeEmbeddings h0_;
  int task_ = 0;
  bool normalize_ = true;
  Matrix stored_;
};

/// sigmoid(H F^T)^T, i.e. B x |classes| probabilities for backbone outputs F (B x D).
Matrix predict_probabilities(const Matrix& graph_out, const Matrix& features);

}  // namespace agcn::expert
