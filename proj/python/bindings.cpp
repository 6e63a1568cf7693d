#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "agcn/acm.hpp"
#include "agcn/errors.hpp"
#include "agcn/losses.hpp"
#include "agcn/metrics.hpp"
#include "agcn/stream.hpp"
#include "agcn/trainer.hpp"

namespace py = pybind11;
using agcn::numerics::Matrix;

// Matrix <-> 2-D float64 numpy array, always by copy.
namespace pybind11::detail {
template <>
struct type_caster<Matrix> {
  PYBIND11_TYPE_CASTER(Matrix, const_name("numpy.ndarray[float64]"));

  bool load(handle src, bool convert) {
    if (!convert && !array_t<double>::check_(src)) return false;
    auto arr = array_t<double, array::c_style | array::forcecast>::ensure(src);
    if (!arr) return false;
    if (arr.ndim() == 1 && arr.shape(0) == 0) {
      value = Matrix();
      return true;
    }
    if (arr.ndim() != 2) return false;
    const auto rows = static_cast<std::size_t>(arr.shape(0));
    const auto cols = static_cast<std::size_t>(arr.shape(1));
    value = Matrix(rows, cols, std::vector<double>(arr.data(), arr.data() + rows * cols));
    return true;
  }

  static handle cast(const Matrix& m, return_value_policy, handle) {
    array_t<double> out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out.release();
  }
};
}  // namespace pybind11::detail

namespace {

namespace st = agcn::stream;
namespace tr = agcn::trainer;
namespace mt = agcn::metrics;

py::dict report_dict(const mt::MetricReport& r) {
  py::dict d;
  d["OP"] = r.overall_precision;
  d["CP"] = r.per_class_precision;
  d["OR"] = r.overall_recall;
  d["CR"] = r.per_class_recall;
  d["OF1"] = r.overall_f1;
  d["CF1"] = r.per_class_f1;
  d["mAP"] = r.mean_ap ? py::cast(*r.mean_ap) : py::none();
  return d;
}

py::tuple vector_loss(const agcn::losses::VectorLoss& l) { return py::make_tuple(l.value, l.grad); }

tr::Metric parse_metric(const std::string& name) {
  if (name == "mAP") return tr::Metric::kMap;
  if (name == "CF1") return tr::Metric::kCf1;
  if (name == "OF1") return tr::Metric::kOf1;
  throw agcn::ConfigError("unknown metric '" + name + "' (expected mAP, CF1 or OF1)");
}

mt::PerformanceTable table_from(const std::map<std::pair<int, int>, double>& values) {
  mt::PerformanceTable t;
  for (const auto& [key, v] : values) t.record(key.first, key.second, v);
  return t;
}

void check_index(std::size_t i, std::size_t n) {
  if (i >= n) throw py::index_error("class index " + std::to_string(i) + " out of range");
}

}  // namespace

PYBIND11_MODULE(_agcn, m) {
  m.doc() = "Continual multi-label learning with augmented label-correlation graphs";

  auto base = py::register_exception<agcn::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<agcn::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<agcn::DomainError>(m, "DomainError", base.ptr());
  py::register_exception<agcn::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<agcn::NumericError>(m, "NumericError", base.ptr());
  py::register_exception<agcn::DataError>(m, "DataError", base.ptr());
  py::register_exception<agcn::IoError>(m, "IoError", base.ptr());

  // stream ------------------------------------------------------------------
  py::class_<st::Example>(m, "Example")
      .def(py::init([](std::string id, std::vector<double> features, st::ClassSet labels) {
             std::sort(labels.begin(), labels.end());
             labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
             return st::Example{std::move(id), std::move(features), std::move(labels)};
           }),
           py::arg("id"), py::arg("features"), py::arg("labels"))
      .def_readwrite("id", &st::Example::id)
      .def_readwrite("features", &st::Example::features)
      .def_readwrite("labels", &st::Example::labels)
      .def("__eq__", [](const st::Example& a, const st::Example& b) { return a == b; })
      .def("__repr__", [](const st::Example& e) {
        return "Example(id='" + e.id + "', " + std::to_string(e.labels.size()) + " labels)";
      });

  py::class_<st::TaskStream>(m, "TaskStream")
      .def(py::init<>())
      .def_readwrite("task_id", &st::TaskStream::task_id)
      .def_readwrite("classes", &st::TaskStream::classes)
      .def_readwrite("train", &st::TaskStream::train)
      .def_readwrite("test", &st::TaskStream::test)
      .def("visible_labels", &st::TaskStream::visible_labels)
      .def("__eq__", [](const st::TaskStream& a, const st::TaskStream& b) { return a == b; });

  py::class_<st::SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("class_count", &st::SyntheticConfig::class_count)
      .def_readwrite("task_count", &st::SyntheticConfig::task_count)
      .def_readwrite("target", &st::SyntheticConfig::target)
      .def_readwrite("train_per_task", &st::SyntheticConfig::train_per_task)
      .def_readwrite("test_per_task", &st::SyntheticConfig::test_per_task)
      .def_readwrite("feature_dim", &st::SyntheticConfig::feature_dim)
      .def_readwrite("prototype_scale", &st::SyntheticConfig::prototype_scale)
      .def_readwrite("noise_std", &st::SyntheticConfig::noise_std)
      .def_readwrite("seed", &st::SyntheticConfig::seed);

  m.def("generate_synthetic", &st::generate_synthetic, py::arg("config"));
  m.def("benchmark_target", &st::benchmark_target, py::arg("class_count"), py::arg("task_count"),
        py::arg("background") = 0.03, py::arg("partner") = 0.9);
  m.def("even_partition", &st::even_partition, py::arg("class_count"), py::arg("task_count"));
  m.def("validate_streams",
        [](const std::vector<st::TaskStream>& s) { st::validate_streams(s); });
  m.def(
      "split_dataset",
      [](const std::vector<st::Example>& examples, const std::vector<st::ClassSet>& partition) {
        auto r = st::split_dataset(examples, partition);
        std::vector<std::pair<std::size_t, std::size_t>> counts;
        for (const auto& c : r.report.tasks) counts.emplace_back(c.special, c.mixed);
        return py::make_tuple(std::move(r.tasks), counts);
      },
      py::arg("examples"), py::arg("partition"),
      "Returns (tasks, [(special, mixed) per task]).");
  m.def("read_jsonl", py::overload_cast<const std::filesystem::path&>(&st::read_jsonl),
        py::arg("path"));
  m.def(
      "write_jsonl",
      [](const std::filesystem::path& p, const std::vector<st::Example>& e) {
        st::write_jsonl(p, e);
      },
      py::arg("path"), py::arg("examples"));

  // acm ---------------------------------------------------------------------
  namespace acm = agcn::acm;
  py::class_<acm::LabelStats>(m, "LabelStats")
      .def(py::init<std::size_t, std::size_t>(), py::arg("new_classes"), py::arg("old_classes"))
      .def("observe_batch",
           py::overload_cast<const Matrix&, const Matrix&>(&acm::LabelStats::observe_batch),
           py::arg("hard"), py::arg("soft"))
      .def("observe_batch", py::overload_cast<const Matrix&>(&acm::LabelStats::observe_batch),
           py::arg("hard"))
      .def_property_readonly("examples_seen", &acm::LabelStats::examples_seen)
      .def("pair_count", [](const acm::LabelStats& s, std::size_t i, std::size_t j) {
        check_index(i, s.new_count());
        check_index(j, s.new_count());
        return s.pair_count(i, j);
      })
      .def("class_count", [](const acm::LabelStats& s, std::size_t j) {
        check_index(j, s.new_count());
        return s.class_count(j);
      })
      .def("soft_sum", [](const acm::LabelStats& s, std::size_t i) {
        check_index(i, s.old_count());
        return s.soft_sum(i);
      });

  py::class_<acm::CorrelationMatrix>(m, "CorrelationMatrix")
      .def(py::init<Matrix, std::size_t>(), py::arg("raw"), py::arg("boundary"))
      .def_property_readonly("raw", &acm::CorrelationMatrix::raw)
      .def_property_readonly("boundary", &acm::CorrelationMatrix::boundary)
      .def_property_readonly("size", &acm::CorrelationMatrix::size)
      .def("old_old", &acm::CorrelationMatrix::old_old)
      .def("old_new", &acm::CorrelationMatrix::old_new)
      .def("new_old", &acm::CorrelationMatrix::new_old)
      .def("new_new", &acm::CorrelationMatrix::new_new)
      .def("row_normalized", &acm::CorrelationMatrix::row_normalized)
      .def("to_json",
           [](const acm::CorrelationMatrix& c, const std::vector<std::string>& names, int task) {
             return acm::to_json(c, names, task);
           },
           py::arg("class_names"), py::arg("task"))
      .def_static("from_json", &acm::from_json, py::arg("text"));

  m.def("new_new_block", &acm::new_new_block, py::arg("stats"));
  m.def("old_new_block", &acm::old_new_block, py::arg("stats"));
  m.def("new_old_block", &acm::new_old_block, py::arg("stats"), py::arg("r"));
  m.def("assemble", &acm::assemble, py::arg("prev"), py::arg("b"), py::arg("r"), py::arg("q"));
  m.def("assemble_from_stats", &acm::assemble_from_stats, py::arg("prev"), py::arg("stats"),
        py::arg("intra_only") = false);

  // losses ------------------------------------------------------------------
  namespace ls = agcn::losses;
  m.def("cls_loss", [](const std::vector<double>& y, const std::vector<double>& p) {
    return vector_loss(ls::cls_loss(y, p));
  }, py::arg("y"), py::arg("y_hat"), "Returns (value, gradient).");
  m.def("dst_loss", [](const std::vector<double>& z, const std::vector<double>& p) {
    return vector_loss(ls::dst_loss(z, p));
  }, py::arg("z"), py::arg("y_hat"), "Returns (value, gradient).");
  m.def("gph_loss", [](const Matrix& g_prev, const Matrix& h) {
    const auto l = ls::gph_loss(g_prev, h);
    return py::make_tuple(l.value, l.grad);
  }, py::arg("g_prev"), py::arg("h"), "Returns (value, gradient w.r.t. h).");

  // metrics -----------------------------------------------------------------
  m.def("evaluate", [](const Matrix& scores, const Matrix& truth, double threshold) {
    return report_dict(mt::evaluate(mt::EvalBatch{scores, truth, threshold}));
  }, py::arg("scores"), py::arg("truth"), py::arg("threshold") = 0.7);
  m.def("average_precision",
        [](const std::vector<double>& scores, const std::vector<bool>& positive) {
          return mt::average_precision(scores, positive);
        },
        py::arg("scores"), py::arg("positive"));
  m.def("forgetting", [](const std::map<std::pair<int, int>, double>& table, int t) {
    return mt::forgetting(table_from(table), t);
  }, py::arg("table"), py::arg("t"),
        "`table` maps (after_task, eval_task) to the metric value.");

  // trainer -----------------------------------------------------------------
  py::class_<tr::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def("set", &tr::apply_setting, py::arg("key"), py::arg("value"),
           "Sets one field from its textual value, as in a config file.")
      .def("apply_text", &tr::apply_config_text, py::arg("text"))
      .def("to_text", &tr::config_to_text)
      .def("validate", &tr::TrainConfig::validate)
      .def_readwrite("batch_size", &tr::TrainConfig::batch_size)
      .def_readwrite("seed", &tr::TrainConfig::seed)
      .def_readwrite("embedding_seed", &tr::TrainConfig::embedding_seed)
      .def_readwrite("threshold", &tr::TrainConfig::threshold)
      .def_property(
          "mode", [](const tr::TrainConfig& c) { return tr::to_string(c.mode); },
          [](tr::TrainConfig& c, const std::string& s) { c.mode = tr::parse_mode(s); })
      .def_property(
          "ablation", [](const tr::TrainConfig& c) { return tr::to_string(c.ablation); },
          [](tr::TrainConfig& c, const std::string& s) { c.ablation = tr::parse_ablation(s); });
  m.def("config_keys", &tr::config_keys);

  py::class_<tr::RunResult>(m, "RunResult")
      .def_property_readonly("final_map", [](const tr::RunResult& r) { return r.record.final_map(); })
      .def_property_readonly("metrics_csv", [](const tr::RunResult& r) { return r.record.metrics_csv(); })
      .def_property_readonly("losses_csv", [](const tr::RunResult& r) { return r.record.losses_csv(); })
      .def_property_readonly("metrics_json", [](const tr::RunResult& r) { return r.record.metrics_json(); })
      .def_property_readonly("overall", [](const tr::RunResult& r) {
        py::list out;
        for (const auto& rep : r.record.overall) out.append(report_dict(rep));
        return out;
      })
      .def_property_readonly("map_table", [](const tr::RunResult& r) { return r.record.map.entries(); })
      .def_readonly("acms", &tr::RunResult::acms)
      .def_readonly("examples_seen", &tr::RunResult::examples_seen)
      .def_readonly("distinct_examples", &tr::RunResult::distinct_examples)
      .def_readonly("max_touches", &tr::RunResult::max_touches)
      .def("forgetting", [](const tr::RunResult& r, const std::string& metric, int t) {
        return tr::forgetting(r.record, parse_metric(metric), t);
      }, py::arg("metric"), py::arg("t"));

  m.def("run", [](const std::vector<st::TaskStream>& streams, const tr::TrainConfig& config) {
    py::gil_scoped_release release;
    return tr::run(streams, config);
  }, py::arg("streams"), py::arg("config"));

  m.def("benchmark_preset", [](std::uint64_t seed) {
    auto b = tr::benchmark_preset(seed);
    return py::make_tuple(b.data, b.train);
  }, py::arg("seed") = 0, "Returns (SyntheticConfig, TrainConfig) for the bundled benchmark.");
}
