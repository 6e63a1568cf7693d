#include "agcn/backbone.hpp"

#include <random>

#include "agcn/errors.hpp"
#include "agcn/random.hpp"

namespace agcn::backbone {

Backbone init_backbone(std::size_t input_dim, std::size_t hidden, std::size_t out_dim,
                       std::uint64_t seed, Activation act) {
  std::mt19937_64 rng(mix_seed(seed, 0x626f6e65ULL));
  Backbone b;
  b.w1 = glorot_uniform(input_dim, hidden, rng);
  b.b1 = Matrix(1, hidden);
  b.w2 = glorot_uniform(hidden, out_dim, rng);
  b.b2 = Matrix(1, out_dim);
  b.act = act;
  return b;
}

namespace {

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    auto bv = bias.row(0);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) s(0, c) += m(r, c);
  return s;
}

}  // namespace

BackboneForward forward(const Backbone& b, const Matrix& x) {
  if (x.cols() != b.input_dim()) {
    throw ShapeError("backbone: input has " + std::to_string(x.cols()) + " features, expected " +
                     std::to_string(b.input_dim()));
  }
  BackboneForward f;
  f.input = x;
  f.pre1 = numerics::matmul(x, b.w1);
  add_bias(f.pre1, b.b1);
  f.h1 = b.act.apply(f.pre1);
  f.out = numerics::matmul(f.h1, b.w2);
  add_bias(f.out, b.b2);
  return f;
}

std::vector<double> extract(const Backbone& b, std::span<const double> x) {
  const Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
  return forward(b, in).out.values();
}

BackboneGradients backward(const Backbone& b, const BackboneForward& cache, const Matrix& d_out) {
  if (!d_out.same_shape(cache.out)) throw ShapeError("backbone::backward: upstream has wrong shape");
  BackboneGradients g;
  g.w2 = numerics::matmul_tn(cache.h1, d_out);
  g.b2 = column_sums(d_out);
  const Matrix d_pre1 = b.act.backprop(numerics::matmul_nt(d_out, b.w2), cache.pre1);
  g.w1 = numerics::matmul_tn(cache.input, d_pre1);
  g.b1 = column_sums(d_pre1);
  return g;
}

}  // namespace agcn::backbone
