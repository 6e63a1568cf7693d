#include "agcn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "agcn/errors.hpp"

namespace agcn::losses {

double clip_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("probability " + std::to_string(p) + " is outside [0,1]");
  }
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

void LossWeights::validate() const {
  for (double v : {cls, dst, gph}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
}

namespace {

VectorLoss cross_entropy(std::span<const double> target, std::span<const double> pred,
                         const char* what) {
  if (target.size() != pred.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(target.size()) + " targets vs " +
                     std::to_string(pred.size()) + " predictions");
  }
  VectorLoss out;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clip_probability(pred[i]);
    const double t = target[i];
    out.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    out.grad[i] = -t / p + (1.0 - t) / (1.0 - p);
  }
  return out;
}

}  // namespace

VectorLoss cls_loss(std::span<const double> y, std::span<const double> y_hat_new) {
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw DomainError("cls_loss: targets must be 0 or 1");
  }
  return cross_entropy(y, y_hat_new, "cls_loss");
}

VectorLoss dst_loss(std::span<const double> z, std::span<const double> y_hat_old) {
  for (double v : z) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("dst_loss: soft targets must lie in [0,1]");
  }
  return cross_entropy(z, y_hat_old, "dst_loss");
}

GraphLoss gph_loss(const Matrix& g_prev, const Matrix& h) {
  if (g_prev.cols() != h.cols() || g_prev.rows() > h.rows()) {
    throw ShapeError("gph_loss: stored graph is " + std::to_string(g_prev.rows()) + "x" +
                     std::to_string(g_prev.cols()) + ", live graph " + std::to_string(h.rows()) +
                     "x" + std::to_string(h.cols()));
  }
  GraphLoss out{0.0, Matrix(h.rows(), h.cols())};
  for (std::size_t i = 0; i < g_prev.rows(); ++i) {
    for (std::size_t c = 0; c < h.cols(); ++c) {
      const double diff = h(i, c) - g_prev(i, c);
      out.value += diff * diff;
      out.grad(i, c) = 2.0 * diff;
    }
  }
  return out;
}

TotalLoss total_loss(const LossWeights& w, const Matrix& y, const Matrix& y_hat, const Matrix& z,
                     const Matrix& g_prev, const Matrix& h, int task) {
  if (task < 1) throw DomainError("total_loss: task index must be >= 1");
  w.validate();
  const std::size_t batch = y_hat.rows();
  const std::size_t n_seen = y_hat.cols();
  const std::size_t n_new = y.cols();
  if (batch == 0) throw ShapeError("total_loss: empty batch");
  if (y.rows() != batch || n_new > n_seen) throw ShapeError("total_loss: y does not match y_hat");
  const std::size_t n_old = n_seen - n_new;
  if (task == 1 && n_old != 0) throw ShapeError("total_loss: task 1 has no old classes");
  if (task > 1 && (z.rows() != batch || z.cols() != n_old)) {
    throw ShapeError("total_loss: z must be " + std::to_string(batch) + "x" + std::to_string(n_old));
  }

  const bool first = task == 1;
  const double w_cls = first ? 1.0 : w.cls;
  const double w_dst = first ? 0.0 : w.dst;
  const double w_gph = first ? 0.0 : w.gph;
  const double inv_b = 1.0 / static_cast<double>(batch);

  TotalLoss out;
  out.d_pred = Matrix(batch, n_seen);
  out.d_logits = Matrix(batch, n_seen);
  for (std::size_t b = 0; b < batch; ++b) {
    auto pred = y_hat.row(b);
    const auto cls = cls_loss(y.row(b), pred.subspan(n_old));
    out.cls += cls.value * inv_b;
    for (std::size_t j = 0; j < n_new; ++j) {
      out.d_pred(b, n_old + j) = w_cls * inv_b * cls.grad[j];
      out.d_logits(b, n_old + j) = w_cls * inv_b * (pred[n_old + j] - y(b, j));
    }
    if (first) continue;
    const auto dst = dst_loss(z.row(b), pred.first(n_old));
    out.dst += dst.value * inv_b;
    for (std::size_t i = 0; i < n_old; ++i) {
      out.d_pred(b, i) = w_dst * inv_b * dst.grad[i];
      out.d_logits(b, i) = w_dst * inv_b * (pred[i] - z(b, i));
    }
  }

  if (first) {
    out.d_h = Matrix(h.rows(), h.cols());
  } else {
    auto g = gph_loss(g_prev, h);
    out.gph = g.value;
    out.d_h = std::move(g.grad);
    out.d_h *= w_gph;
  }
  out.value = w_cls * out.cls + w_dst * out.dst + w_gph * out.gph;
  return out;
}

}  // namespace agcn::losses
