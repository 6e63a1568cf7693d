#include "agcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "agcn/errors.hpp"
#include "agcn/random.hpp"

namespace agcn::graph {

std::vector<double> embedding_row(stream::ClassId id, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> row(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : row) {
      v = gauss(rng);
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : row) v *= inv;
  return row;
}

void NodeEmbeddings::extend(std::span<const stream::ClassId> more) {
  Matrix grown(class_ids.size() + more.size(), dim);
  grown.set_block(0, 0, rows);
  std::size_t r = class_ids.size();
  for (stream::ClassId id : more) {
    if (std::find(class_ids.begin(), class_ids.end(), id) != class_ids.end()) {
      throw ConfigError("NodeEmbeddings::extend: class " + std::to_string(id) +
                        " already has an embedding");
    }
    const auto row = embedding_row(id, dim, seed);
    std::copy(row.begin(), row.end(), grown.row(r++).begin());
    class_ids.push_back(id);
  }
  rows = std::move(grown);
}

NodeEmbeddings init_embeddings(std::span<const stream::ClassId> class_ids, std::size_t dim,
                               std::uint64_t seed) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  NodeEmbeddings e{{}, dim, seed, Matrix(0, dim)};
  e.extend(class_ids);
  return e;
}

GraphModel init_graph_model(std::size_t dim, std::size_t hidden, std::size_t out_dim,
                            std::uint64_t seed, Activation act) {
  std::mt19937_64 rng(mix_seed(seed, 0x6772617068ULL));
  GraphModel m;
  m.w1 = glorot_uniform(dim, hidden, rng);
  m.w2 = glorot_uniform(hidden, out_dim, rng);
  m.act = act;
  return m;
}

GraphForward forward(const Matrix& adjacency, const Matrix& h0, const GraphModel& model) {
  using numerics::matmul;
  if (adjacency.rows() != adjacency.cols() || adjacency.cols() != h0.rows()) {
    throw ShapeError("graph::forward: adjacency is " + std::to_string(adjacency.rows()) + "x" +
                     std::to_string(adjacency.cols()) + " but there are " +
                     std::to_string(h0.rows()) + " node rows");
  }
  GraphForward f;
  f.a_h0 = matmul(adjacency, h0);
  f.pre1 = matmul(f.a_h0, model.w1);
  f.h1 = model.act.apply(f.pre1);
  f.a_h1 = matmul(adjacency, f.h1);
  f.pre2 = matmul(f.a_h1, model.w2);
  f.out = model.act.apply(f.pre2);
  return f;
}

GraphGradients backward(const GraphForward& cache, const Matrix& adjacency,
                        const GraphModel& model, const Matrix& d_out) {
  using numerics::matmul_nt;
  using numerics::matmul_tn;
  if (!d_out.same_shape(cache.out)) throw ShapeError("graph::backward: dLoss/dH has wrong shape");
  const Matrix d_pre2 = model.act.backprop(d_out, cache.pre2);
  GraphGradients g;
  g.w2 = matmul_tn(cache.a_h1, d_pre2);
  const Matrix d_a_h1 = matmul_nt(d_pre2, model.w2);
  const Matrix d_h1 = matmul_tn(adjacency, d_a_h1);
  const Matrix d_pre1 = model.act.backprop(d_h1, cache.pre1);
  g.w1 = matmul_tn(cache.a_h0, d_pre1);
  return g;
}

}  // namespace agcn::graph
