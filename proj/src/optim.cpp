#include "agcn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "agcn/errors.hpp"

namespace agcn::numerics {

AdamState::AdamState(std::size_t rows, std::size_t cols, AdamHyper hyper)
    : m_(rows, cols), v_(rows, cols), hyper_(hyper) {}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  if (!param.same_shape(grad) || !param.same_shape(state.m_)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes disagree");
  }
  const auto& hp = state.hyper_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);

  auto p = param.data();
  auto g = grad.data();
  auto m = state.m_.data();
  auto v = state.v_.data();
  // An identically zero gradient leaves the parameter where it is; the moments
  // still decay so the state stays consistent with the step count.
  const bool frozen = std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
    if (frozen) continue;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
  }
}

double finite_diff_check(const ScalarFn& f, std::span<const double> params,
                         std::span<const double> analytic_grad, double h) {
  if (params.size() != analytic_grad.size()) {
    throw ShapeError("finite_diff_check: " + std::to_string(params.size()) +
                     " parameters but " + std::to_string(analytic_grad.size()) +
                     " gradient entries");
  }
  if (!(h > 0.0)) throw DomainError("finite_diff_check: step must be positive");

  std::vector<double> x(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_check: non-finite objective at coordinate " +
                         std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err =
        std::abs(numeric - analytic_grad[i]) / std::max(1.0, std::abs(analytic_grad[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace agcn::numerics
