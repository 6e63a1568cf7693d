#include "agcn/expert.hpp"

#include "agcn/errors.hpp"

namespace agcn::expert {

Matrix predict_probabilities(const Matrix& graph_out, const Matrix& features) {
  Matrix p = numerics::matmul_nt(features, graph_out);
  for (double& v : p.data()) v = numerics::sigmoid(v);
  return p;
}

ExpertSnapshot ExpertSnapshot::take(const backbone::Backbone& b, const graph::GraphModel& g,
                                    const acm::CorrelationMatrix& a,
                                    const graph::NodeEmbeddings& h0, int task, bool normalize) {
  if (a.size() != h0.rows.rows()) {
    throw ShapeError("ExpertSnapshot: correlation matrix and embeddings disagree on class count");
  }
  ExpertSnapshot s;
  s.backbone_ = b;
  s.graph_ = g;
  s.acm_ = a;
  s.h0_ = h0;
  s.task_ = task;
  s.normalize_ = normalize;
  s.stored_ = graph::forward(a.graph_view(normalize), h0.rows, g).out;
  return s;
}

std::vector<double> ExpertSnapshot::soft_labels(std::span<const double> x) const {
  const Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
  return soft_labels(in).values();
}

Matrix ExpertSnapshot::soft_labels(const Matrix& x) const {
  return predict_probabilities(stored_, backbone::forward(backbone_, x).out);
}

checkpoint::Bundle ExpertSnapshot::to_bundle() const {
  checkpoint::Bundle out;
  checkpoint::put(out, "expert.backbone", backbone_);
  checkpoint::put(out, "expert.graph", graph_);
  out.tensors["expert.acm"] = acm_.raw();
  out.tensors["expert.h0"] = h0_.rows;
  Matrix ids(1, h0_.class_ids.size());
  for (std::size_t i = 0; i < h0_.class_ids.size(); ++i) ids(0, i) = h0_.class_ids[i];
  out.tensors["expert.class_ids"] = ids;
  out.scalars["expert.boundary"] = static_cast<double>(acm_.boundary());
  out.scalars["expert.task"] = task_;
  out.scalars["expert.normalize"] = normalize_ ? 1.0 : 0.0;
  out.scalars["expert.embedding_seed_hi"] = static_cast<double>(h0_.seed >> 32);
  out.scalars["expert.embedding_seed_lo"] = static_cast<double>(h0_.seed & 0xffffffffULL);
  return out;
}

ExpertSnapshot ExpertSnapshot::from_bundle(const checkpoint::Bundle& bundle) {
  ExpertSnapshot s;
  s.backbone_ = checkpoint::get_backbone(bundle, "expert.backbone");
  s.graph_ = checkpoint::get_graph(bundle, "expert.graph");
  s.acm_ = acm::CorrelationMatrix(bundle.tensor("expert.acm"),
                                  static_cast<std::size_t>(bundle.scalar("expert.boundary")));
  s.h0_.rows = bundle.tensor("expert.h0");
  s.h0_.dim = s.h0_.rows.cols();
  s.h0_.seed = (static_cast<std::uint64_t>(bundle.scalar("expert.embedding_seed_hi")) << 32) |
               static_cast<std::uint64_t>(bundle.scalar("expert.embedding_seed_lo"));
  for (double v : bundle.tensor("expert.class_ids").data())
    s.h0_.class_ids.push_back(static_cast<stream::ClassId>(v));
  s.task_ = static_cast<int>(bundle.scalar("expert.task"));
  s.normalize_ = bundle.scalar("expert.normalize") != 0.0;
  if (s.acm_.size() != s.h0_.rows.rows()) throw DataError("expert bundle: class counts disagree");
  s.stored_ = graph::forward(s.acm_.graph_view(s.normalize_), s.h0_.rows, s.graph_).out;
  return s;
}

}  // namespace agcn::expert
