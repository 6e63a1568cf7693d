#include "agcn/acm.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcn/errors.hpp"

namespace agcn::acm {

LabelStats::LabelStats(std::size_t new_classes, std::size_t old_classes)
    : pair_counts_(new_classes * new_classes, 0),
      class_counts_(new_classes, 0),
      soft_sum_(old_classes, 0.0),
      soft_pair_sum_(old_classes * new_classes, 0.0) {}

void LabelStats::observe_batch(const Matrix& hard, const Matrix& soft) {
  const std::size_t n_new = new_count();
  const std::size_t n_old = old_count();
  const std::size_t batch = hard.rows();
  if (hard.cols() != n_new) {
    throw ShapeError("observe_batch: hard labels have " + std::to_string(hard.cols()) +
                     " columns, expected " + std::to_string(n_new));
  }
  if (n_old > 0 && (soft.rows() != batch || soft.cols() != n_old)) {
    throw ShapeError("observe_batch: soft labels must be " + std::to_string(batch) + "x" +
                     std::to_string(n_old));
  }
  if (n_old == 0 && soft.cols() != 0) {
    throw ShapeError("observe_batch: soft labels given but there are no old classes");
  }
  for (double v : hard.data()) {
    if (v != 0.0 && v != 1.0) throw DomainError("observe_batch: hard labels must be 0 or 1");
  }
  if (n_old > 0) {
    for (double v : soft.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("observe_batch: soft label outside [0,1]");
    }
  }

  for (std::size_t b = 0; b < batch; ++b) {
    auto y = hard.row(b);
    for (std::size_t j = 0; j < n_new; ++j) {
      if (y[j] == 0.0) continue;
      class_counts_[j] += 1;
      for (std::size_t i = 0; i < n_new; ++i)
        if (y[i] != 0.0) pair_counts_[i * n_new + j] += 1;
    }
    if (n_old == 0) continue;
    auto z = soft.row(b);
    for (std::size_t i = 0; i < n_old; ++i) {
      soft_sum_[i] += z[i];
      for (std::size_t j = 0; j < n_new; ++j)
        if (y[j] != 0.0) soft_pair_sum_[i * n_new + j] += z[i];
    }
  }
  examples_ += batch;
}

Matrix new_new_block(const LabelStats& stats) {
  const std::size_t n = stats.new_count();
  Matrix b(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto nj = stats.class_count(j);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) {
        b(i, j) = 1.0;
      } else if (nj > 0) {
        b(i, j) = static_cast<double>(stats.pair_count(i, j)) / static_cast<double>(nj);
      }
    }
  }
  return b;
}

Matrix old_new_block(const LabelStats& stats) {
  Matrix r(stats.old_count(), stats.new_count());
  for (std::size_t j = 0; j < stats.new_count(); ++j) {
    const auto nj = stats.class_count(j);
    if (nj == 0) continue;
    for (std::size_t i = 0; i < stats.old_count(); ++i)
      r(i, j) = stats.soft_pair_sum(i, j) / static_cast<double>(nj);
  }
  return r;
}

Matrix new_old_block(const LabelStats& stats, const Matrix& r) {
  if (r.rows() != stats.old_count() || r.cols() != stats.new_count()) {
    throw ShapeError("new_old_block: R does not match the statistics' class counts");
  }
  Matrix q(stats.new_count(), stats.old_count());
  for (std::size_t i = 0; i < stats.old_count(); ++i) {
    const double zi = stats.soft_sum(i);
    if (zi == 0.0) continue;
    for (std::size_t j = 0; j < stats.new_count(); ++j)
      q(j, i) = r(i, j) * static_cast<double>(stats.class_count(j)) / zi;
  }
  return q;
}

CorrelationMatrix::CorrelationMatrix(Matrix raw, std::size_t boundary)
    : raw_(std::move(raw)), boundary_(boundary) {
  if (raw_.rows() != raw_.cols()) throw ShapeError("CorrelationMatrix must be square");
  if (boundary_ > raw_.rows()) throw ShapeError("CorrelationMatrix boundary exceeds size");
}

Matrix CorrelationMatrix::row_normalized() const {
  Matrix out = raw_;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    double sum = 0.0;
    for (double v : row) sum += v;
    if (sum > 0.0)
      for (double& v : row) v /= sum;
  }
  return out;
}

CorrelationMatrix assemble(const std::optional<CorrelationMatrix>& prev, const Matrix& b,
                           const Matrix& r, const Matrix& q) {
  const std::size_t n_new = b.rows();
  if (b.cols() != n_new) throw ShapeError("assemble: B must be square");
  const std::size_t n_old = prev ? prev->size() : 0;
  if (r.rows() != n_old || r.cols() != n_new || q.rows() != n_new || q.cols() != n_old) {
    throw ShapeError("assemble: R must be " + std::to_string(n_old) + "x" +
                     std::to_string(n_new) + " and Q " + std::to_string(n_new) + "x" +
                     std::to_string(n_old));
  }
  Matrix a(n_old + n_new, n_old + n_new);
  if (prev) {
    a.set_block(0, 0, prev->raw());
    a.set_block(0, n_old, r);
    a.set_block(n_old, 0, q);
  }
  a.set_block(n_old, n_old, b);
  for (std::size_t i = n_old; i < a.rows(); ++i) a(i, i) = 1.0;
  return CorrelationMatrix(std::move(a), n_old);
}

CorrelationMatrix assemble_from_stats(const std::optional<CorrelationMatrix>& prev,
                                      const LabelStats& stats, bool intra_only) {
  const std::size_t n_old = prev ? prev->size() : 0;
  if (n_old != stats.old_count()) {
    throw ShapeError("assemble_from_stats: statistics track " +
                     std::to_string(stats.old_count()) + " old classes, previous matrix has " +
                     std::to_string(n_old));
  }
  const Matrix b = new_new_block(stats);
  if (intra_only || n_old == 0) {
    return assemble(prev, b, Matrix(n_old, stats.new_count()),
                    Matrix(stats.new_count(), n_old));
  }
  const Matrix r = old_new_block(stats);
  return assemble(prev, b, r, new_old_block(stats, r));
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

void require_names(const CorrelationMatrix& m, std::span<const std::string> names) {
  if (names.size() != m.size()) {
    throw ShapeError("ACM export: " + std::to_string(names.size()) + " class names for a " +
                     std::to_string(m.size()) + "-class matrix");
  }
}

}  // namespace

std::string to_csv(const CorrelationMatrix& m, std::span<const std::string> class_names) {
  require_names(m, class_names);
  std::ostringstream out;
  out << "class";
  for (const auto& n : class_names) out << ',' << csv_field(n);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << csv_field(class_names[i]);
    for (double v : m.raw().row(i)) out << ',' << fmt_double(v);
    out << '\n';
  }
  return out.str();
}

std::string to_json(const CorrelationMatrix& m, std::span<const std::string> class_names,
                    int task) {
  require_names(m, class_names);
  nlohmann::ordered_json j;
  j["task"] = task;
  j["size"] = m.size();
  j["boundary"] = m.boundary();
  j["classes"] = std::vector<std::string>(class_names.begin(), class_names.end());
  j["matrix"] = matrix_json(m.raw());
  nlohmann::ordered_json blocks = nlohmann::ordered_json::object();
  if (m.boundary() > 0) {
    blocks["Old-Old"] = matrix_json(m.old_old());
    blocks["Old-New"] = matrix_json(m.old_new());
    blocks["New-Old"] = matrix_json(m.new_old());
  }
  blocks["New-New"] = matrix_json(m.new_new());
  j["blocks"] = blocks;
  return j.dump(1);
}

CorrelationMatrix from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
    const std::size_t n = rows.size();
    std::vector<double> data;
    data.reserve(n * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw DataError("ACM JSON: matrix is not square");
      data.insert(data.end(), r.begin(), r.end());
    }
    return CorrelationMatrix(Matrix(n, n, std::move(data)), j.at("boundary").get<std::size_t>());
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("ACM JSON: ") + ex.what());
  }
}

}  // namespace agcn::acm
