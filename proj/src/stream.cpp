#include "agcn/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "agcn/errors.hpp"

namespace agcn::stream {

using numerics::Matrix;

ClassSet restrict_labels(const ClassSet& labels, const ClassSet& classes) {
  ClassSet out;
  for (ClassId c : classes) {
    if (std::binary_search(labels.begin(), labels.end(), c)) out.push_back(c);
  }
  return out;
}

std::vector<double> TaskStream::hard_labels(const Example& e) const {
  std::vector<double> y(classes.size(), 0.0);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (std::binary_search(e.labels.begin(), e.labels.end(), classes[i])) y[i] = 1.0;
  }
  return y;
}

void validate_streams(std::span<const TaskStream> streams) {
  if (streams.empty()) throw ConfigError("no task streams given");
  std::unordered_set<ClassId> seen;
  std::size_t width = 0;
  bool have_width = false;
  for (std::size_t t = 0; t < streams.size(); ++t) {
    const TaskStream& s = streams[t];
    const std::string tag = "task " + std::to_string(t + 1);
    if (s.task_id != static_cast<int>(t + 1)) {
      throw ConfigError(tag + ": task ids must be consecutive from 1, found " +
                        std::to_string(s.task_id));
    }
    if (s.classes.empty()) throw ConfigError(tag + ": empty class set");
    for (ClassId c : s.classes) {
      if (!seen.insert(c).second) {
        throw ConfigError(tag + ": class " + std::to_string(c) + " already belongs to an earlier task");
      }
    }
    if (s.train.empty()) throw ConfigError(tag + ": empty training stream");
    auto check_width = [&](const Example& e) {
      if (!have_width) {
        width = e.features.size();
        have_width = true;
      } else if (e.features.size() != width) {
        throw DataError("example '" + e.id + "' has " + std::to_string(e.features.size()) +
                        " features, expected " + std::to_string(width));
      }
    };
    for (const Example& e : s.train) {
      check_width(e);
      if (s.visible_labels(e).empty()) {
        throw DataError(tag + ": training example '" + e.id + "' has no label in the task's classes");
      }
    }
    for (const Example& e : s.test) check_width(e);
  }
}

ClassSet seen_classes(std::span<const TaskStream> streams, std::size_t upto) {
  ClassSet out;
  for (std::size_t t = 0; t < upto && t < streams.size(); ++t) {
    out.insert(out.end(), streams[t].classes.begin(), streams[t].classes.end());
  }
  return out;
}

std::size_t SplitReport::total() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.special + t.mixed;
  return n;
}

namespace {

std::unordered_map<ClassId, std::size_t> index_partition(const std::vector<ClassSet>& partition) {
  std::unordered_map<ClassId, std::size_t> cell_of;
  for (std::size_t k = 0; k < partition.size(); ++k) {
    if (partition[k].empty()) {
      throw ConfigError("partition cell " + std::to_string(k + 1) + " is empty");
    }
    for (ClassId c : partition[k]) {
      if (!cell_of.emplace(c, k).second) {
        throw ConfigError("class " + std::to_string(c) + " appears in more than one partition cell");
      }
    }
  }
  return cell_of;
}

}  // namespace

SplitResult split_dataset(std::span<const Example> examples,
                          const std::vector<ClassSet>& partition) {
  if (partition.empty()) throw ConfigError("partition has no cells");
  const auto cell_of = index_partition(partition);

  SplitResult result;
  result.tasks.resize(partition.size());
  result.report.tasks.resize(partition.size());
  for (std::size_t k = 0; k < partition.size(); ++k) {
    result.tasks[k].task_id = static_cast<int>(k + 1);
    result.tasks[k].classes = partition[k];
  }

  // Cells touched by each example, sorted ascending.
  std::vector<std::vector<std::size_t>> touched(examples.size());
  for (std::size_t e = 0; e < examples.size(); ++e) {
    for (ClassId c : examples[e].labels) {
      auto it = cell_of.find(c);
      if (it != cell_of.end()) touched[e].push_back(it->second);
    }
    auto& cells = touched[e];
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    if (cells.empty()) {
      throw DataError("example '" + examples[e].id + "' has no label in any partition cell");
    }
  }

  // Special-labeling examples keep priority.
  std::vector<std::size_t> mixed;
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto& cells = touched[e];
    bool special = cells.size() == 1;
    if (special) {
      for (ClassId c : examples[e].labels) {
        if (!cell_of.contains(c)) {
          special = false;
          break;
        }
      }
    }
    if (special) {
      result.tasks[cells.front()].train.push_back(examples[e]);
      result.report.tasks[cells.front()].special += 1;
    } else {
      mixed.push_back(e);
    }
  }

  for (std::size_t e : mixed) {
    std::size_t best = touched[e].front();
    for (std::size_t k : touched[e]) {
      if (result.tasks[k].train.size() < result.tasks[best].train.size()) best = k;
    }
    result.tasks[best].train.push_back(examples[e]);
    result.report.tasks[best].mixed += 1;
  }
  return result;
}

SplitResult split_dataset(std::span<const Example> train, std::span<const Example> test,
                          const std::vector<ClassSet>& partition) {
  SplitResult result = split_dataset(train, partition);
  SplitResult test_split = split_dataset(test, partition);
  for (std::size_t k = 0; k < result.tasks.size(); ++k) {
    result.tasks[k].test = std::move(test_split.tasks[k].train);
  }
  return result;
}

std::vector<ClassSet> even_partition(std::size_t class_count, std::size_t task_count) {
  if (task_count == 0 || class_count < task_count) {
    throw ConfigError("cannot split " + std::to_string(class_count) + " classes into " +
                      std::to_string(task_count) + " non-empty tasks");
  }
  std::vector<ClassSet> cells(task_count);
  const std::size_t base = class_count / task_count;
  const std::size_t extra = class_count % task_count;
  ClassId next = 0;
  for (std::size_t t = 0; t < task_count; ++t) {
    const std::size_t n = base + (t < extra ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) cells[t].push_back(next++);
  }
  return cells;
}

namespace {

struct InclusionModel {
  std::vector<double> anchor_prob;  // pi_k
  Matrix inclusion;                 // p(i, k): P(i present | anchor k), i != k
};

// Expected P(C_i | C_j) under the anchor model, without implication closure.
Matrix expected_conditionals(const InclusionModel& m) {
  const std::size_t n = m.anchor_prob.size();
  const auto& pi = m.anchor_prob;
  const Matrix& p = m.inclusion;
  std::vector<double> marginal(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    marginal[i] = pi[i];
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) marginal[i] += pi[k] * p(i, k);
  }
  Matrix cond(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    cond(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double joint = pi[i] * p(j, i) + pi[j] * p(i, j);
      for (std::size_t k = 0; k < n; ++k)
        if (k != i && k != j) joint += pi[k] * p(i, k) * p(j, k);
      cond(i, j) = marginal[j] > 0.0 ? joint / marginal[j] : 0.0;
    }
  }
  return cond;
}

InclusionModel calibrate(const Matrix& target, const std::vector<double>& anchor_prob) {
  const std::size_t n = target.rows();
  InclusionModel m{anchor_prob, Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) m.inclusion(i, j) = target(i, j);

  constexpr int kMaxIter = 4000;
  constexpr double kStep = 0.5;
  constexpr double kConverged = 1e-4;
  constexpr double kFeasible = 0.02;
  double err = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    const Matrix cond = expected_conditionals(m);
    err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double gap = target(i, j) - cond(i, j);
        err = std::max(err, std::abs(gap));
        m.inclusion(i, j) = std::clamp(m.inclusion(i, j) + kStep * gap, 0.0, 1.0);
      }
    }
    if (err < kConverged) break;
  }
  if (err > kFeasible) {
    std::ostringstream msg;
    msg << "co-occurrence target is infeasible: best attainable conditional is off by " << err;
    throw ConfigError(msg.str());
  }
  return m;
}

void check_target(const SyntheticConfig& c) {
  const std::size_t n = c.class_count;
  if (n == 0) throw ConfigError("class_count must be positive");
  if (c.target.rows() != n || c.target.cols() != n) {
    throw ConfigError("target co-occurrence must be " + std::to_string(n) + "x" +
                      std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = c.target(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ConfigError("target(" + std::to_string(i) + "," + std::to_string(j) +
                          ") is outside [0,1]");
      }
      // P(i,j) > 0 forces both conditionals to be positive.
      if ((v > 0.0) != (c.target(j, i) > 0.0)) {
        throw ConfigError("target is inconsistent: P(" + std::to_string(i) + "|" +
                          std::to_string(j) + ") and P(" + std::to_string(j) + "|" +
                          std::to_string(i) + ") must both be zero or both positive");
      }
    }
  }
  if (c.feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (c.train_per_task == 0) throw ConfigError("train_per_task must be positive");
  if (!(c.noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
}

void apply_implications(std::vector<bool>& present, const Matrix& target) {
  const std::size_t n = present.size();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t b = 0; b < n; ++b) {
      if (!present[b]) continue;
      for (std::size_t a = 0; a < n; ++a) {
        if (a != b && !present[a] && target(a, b) == 1.0) {
          present[a] = true;
          changed = true;
        }
      }
    }
  }
}

}  // namespace

std::vector<TaskStream> generate_synthetic(const SyntheticConfig& config) {
  check_target(config);
  const std::size_t n = config.class_count;
  const auto cells = even_partition(n, config.task_count);

  std::vector<double> anchor_prob(n);
  for (const auto& cell : cells)
    for (ClassId c : cell)
      anchor_prob[c] = 1.0 / static_cast<double>(config.task_count * cell.size());
  const InclusionModel model = calibrate(config.target, anchor_prob);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double proto_sd = config.prototype_scale / std::sqrt(static_cast<double>(config.feature_dim));
  std::vector<std::vector<double>> prototypes(n, std::vector<double>(config.feature_dim));
  for (auto& proto : prototypes)
    for (double& v : proto) v = proto_sd * gauss(rng);

  auto draw = [&](const ClassSet& cell, const std::string& id) {
    const ClassId anchor = cell[static_cast<std::size_t>(unit(rng) * static_cast<double>(cell.size())) %
                                cell.size()];
    std::vector<bool> present(n, false);
    present[anchor] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = unit(rng);
      if (i != anchor && u < model.inclusion(i, anchor)) present[i] = true;
    }
    apply_implications(present, config.target);

    Example e;
    e.id = id;
    e.features.assign(config.feature_dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!present[i]) continue;
      e.labels.push_back(static_cast<ClassId>(i));
      for (std::size_t d = 0; d < config.feature_dim; ++d) e.features[d] += prototypes[i][d];
    }
    for (double& v : e.features) v += config.noise_std * gauss(rng);
    return e;
  };

  std::vector<TaskStream> streams(config.task_count);
  for (std::size_t t = 0; t < config.task_count; ++t) {
    TaskStream& s = streams[t];
    s.task_id = static_cast<int>(t + 1);
    s.classes = cells[t];
    const std::string prefix = "t" + std::to_string(t + 1);
    for (std::size_t i = 0; i < config.train_per_task; ++i)
      s.train.push_back(draw(s.classes, prefix + "-train-" + std::to_string(i)));
    for (std::size_t i = 0; i < config.test_per_task; ++i)
      s.test.push_back(draw(s.classes, prefix + "-test-" + std::to_string(i)));
  }
  return streams;
}

Matrix benchmark_target(std::size_t class_count, std::size_t task_count, double background,
                        double partner) {
  const auto cells = even_partition(class_count, task_count);
  Matrix target(class_count, class_count, background);
  for (std::size_t i = 0; i < class_count; ++i) target(i, i) = 1.0;
  // Greedy matching of each class with a partner from another task, visiting
  // task pairs in a round-robin order so partners spread across the sequence.
  std::vector<bool> used(class_count, false);
  for (std::size_t gap = 1; gap < cells.size(); ++gap) {
    for (std::size_t t = 0; t + gap < cells.size(); ++t) {
      const auto& a = cells[t];
      const auto& b = cells[t + gap];
      for (ClassId ca : a) {
        if (used[ca]) continue;
        for (ClassId cb : b) {
          if (used[cb]) continue;
          target(ca, cb) = partner;
          target(cb, ca) = partner;
          used[ca] = used[cb] = true;
          break;
        }
        break;
      }
    }
  }
  return target;
}

std::vector<Example> read_jsonl(std::istream& in) {
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example e;
      e.id = j.at("id").get<std::string>();
      e.features = j.at("features").get<std::vector<double>>();
      for (const auto& l : j.at("labels")) {
        const auto v = l.get<std::int64_t>();
        if (v < 0) throw DataError("negative label");
        e.labels.push_back(static_cast<ClassId>(v));
      }
      std::sort(e.labels.begin(), e.labels.end());
      e.labels.erase(std::unique(e.labels.begin(), e.labels.end()), e.labels.end());
      if (e.labels.empty()) throw DataError("empty label set");
      if (!out.empty() && out.front().features.size() != e.features.size()) {
        throw DataError("feature length " + std::to_string(e.features.size()) +
                        " differs from the first example's " +
                        std::to_string(out.front().features.size()));
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Example> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, std::span<const Example> examples) {
  for (const Example& e : examples) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["features"] = e.features;
    j["labels"] = e.labels;
    out << j.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const Example> examples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(out, examples);
}

}  // namespace agcn::stream
