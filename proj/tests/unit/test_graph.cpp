#include <algorithm>
#include <cmath>
#include <numeric>

#include "agcn/errors.hpp"
#include "agcn/graph.hpp"
#include "doctest.h"
#include "testing.hpp"

namespace graph = agcn::graph;
using agcn::numerics::Matrix;
using agcn::testing::Gen;

TEST_SUITE("graph") {

TEST_CASE("scalar forward and backward by hand") {
  const graph::GraphModel m{Matrix{{2}}, Matrix{{3}}, agcn::Activation{0.2}};
  const auto fw = graph::forward(Matrix{{1}}, Matrix{{1}}, m);
  CHECK(fw.h1(0, 0) == 2.0);
  CHECK(fw.out(0, 0) == 6.0);

  const auto g = graph::backward(fw, Matrix{{1}}, m, Matrix{{1}});
  CHECK(g.w2(0, 0) == 2.0);  // H1
  CHECK(g.w1(0, 0) == 3.0);  // W2 * A * H0
}

TEST_CASE("LeakyReLU and zero weights") {
  const agcn::Activation act{0.2};
  CHECK(act(-1.0) == -0.2);
  CHECK(act(4.0) == 4.0);

  const graph::GraphModel zero{Matrix(3, 4), Matrix(4, 2), act};
  Gen g(1);
  const auto fw = graph::forward(agcn::testing::random_adjacency(g, 5), g.matrix(5, 3), zero);
  CHECK(fw.out == Matrix(5, 2));
  const auto grads = graph::backward(fw, agcn::testing::random_adjacency(g, 5), zero, Matrix(5, 2));
  CHECK(grads.w1 == Matrix(3, 4));
  CHECK(grads.w2 == Matrix(4, 2));
}

TEST_CASE("output shape follows the class count") {
  const auto m = graph::init_graph_model(6, 8, 5, 3);
  Gen g(2);
  for (std::size_t n : {1u, 4u, 9u}) {
    const auto fw = graph::forward(agcn::testing::random_adjacency(g, n), g.matrix(n, 6), m);
    CHECK(fw.out.rows() == n);
    CHECK(fw.out.cols() == 5);
  }
  CHECK_THROWS_AS(graph::forward(Matrix(3, 3), Matrix(3, 5), m), agcn::ShapeError);
  CHECK_THROWS_AS(graph::forward(Matrix(2, 3), Matrix(3, 6), m), agcn::ShapeError);
}

TEST_CASE("gradient check on random instances up to 8 classes") {
  Gen g(31);
  for (int rep = 0; rep < 50; ++rep) CHECK(agcn::testing::graph_gradient_error(g) < 1e-4);
}

TEST_CASE("permuting classes permutes output rows") {
  Gen g(5);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = g.between(1, 8);
    const Matrix a = agcn::testing::random_adjacency(g, n);
    const Matrix h0 = g.matrix(n, 4);
    const graph::GraphModel m{g.matrix(4, 6), g.matrix(6, 3), agcn::Activation{0.2}};
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.rng);

    Matrix pa(n, n), ph0(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) pa(i, j) = a(perm[i], perm[j]);
      for (std::size_t k = 0; k < 4; ++k) ph0(i, k) = h0(perm[i], k);
    }
    const Matrix out = graph::forward(a, h0, m).out;
    const Matrix pout = graph::forward(pa, ph0, m).out;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(pout(i, k) - out(perm[i], k)) < 1e-12);
  }
}

TEST_CASE("forward is pure") {
  Gen g(6);
  const Matrix a = agcn::testing::random_adjacency(g, 4);
  const Matrix h0 = g.matrix(4, 3);
  const auto m = graph::init_graph_model(3, 5, 2, 77);
  CHECK(graph::forward(a, h0, m).out == graph::forward(a, h0, m).out);
  CHECK(graph::init_graph_model(3, 5, 2, 77) == m);
}

TEST_CASE("embeddings: unit norm, deterministic, prefix stable") {
  const std::vector<agcn::stream::ClassId> four{0, 1, 2, 3};
  const std::vector<agcn::stream::ClassId> eight{0, 1, 2, 3, 4, 5, 6, 7};
  const auto e4 = graph::init_embeddings(four, 16, 123);
  const auto e8 = graph::init_embeddings(eight, 16, 123);
  CHECK(e8.rows.block(0, 0, 4, 16) == e4.rows);
  for (std::size_t i = 0; i < 8; ++i) {
    double sq = 0.0;
    for (double v : e8.rows.row(i)) sq += v * v;
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
  }
  CHECK(graph::init_embeddings(four, 16, 123) == e4);
  CHECK_FALSE(graph::init_embeddings(four, 16, 124).rows == e4.rows);

  auto grown = e4;
  const std::vector<agcn::stream::ClassId> more{4, 5, 6, 7};
  grown.extend(more);
  CHECK(grown == e8);
  CHECK_THROWS(grown.extend(more));

  // A row depends on the class id, not its position.
  const auto row5 = graph::embedding_row(5, 16, 123);
  CHECK(std::equal(row5.begin(), row5.end(), e8.rows.row(5).begin()));
}

}  // TEST_SUITE
