#pragma once

#include "agcn/matrix.hpp"

namespace agcn {

/// LeakyReLU with a configurable negative slope. Slope 0 is ReLU, slope 1 the identity.
struct Activation {
  double negative_slope = 0.2;

  double operator()(double x) const noexcept { return x > 0.0 ? x : negative_slope * x; }
  double derivative(double x) const noexcept { return x > 0.0 ? 1.0 : negative_slope; }

  numerics::Matrix apply(numerics::Matrix m) const {
    for (double& v : m.data()) v = (*this)(v);
    return m;
  }
  /// upstream * h'(pre), element-wise.
  numerics::Matrix backprop(numerics::Matrix upstream, const numerics::Matrix& pre) const {
    auto u = upstream.data();
    auto p = pre.data();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= derivative(p[i]);
    return upstream;
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

}  // namespace agcn
