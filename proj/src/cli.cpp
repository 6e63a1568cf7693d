#include "agcn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcn/checkpoint.hpp"
#include "agcn/errors.hpp"
#include "agcn/keyvalue.hpp"
#include "agcn/random.hpp"

namespace agcn::cli {

using nlohmann::ordered_json;

int exit_code_for(const std::exception& ex) noexcept {
  if (dynamic_cast<const NumericError*>(&ex)) return kExitNumeric;
  if (dynamic_cast<const IoError*>(&ex)) return kExitIo;
  if (dynamic_cast<const Error*>(&ex)) return kExitConfig;
  return kExitIo;
}

// ---------------------------------------------------------------------------
// Data config

stream::SyntheticConfig DataSpec::to_synthetic() const {
  stream::SyntheticConfig c;
  c.class_count = class_count;
  c.task_count = task_count;
  c.target = stream::benchmark_target(class_count, task_count, background, partner);
  c.train_per_task = train_per_task;
  c.test_per_task = test_per_task;
  c.feature_dim = feature_dim;
  c.prototype_scale = prototype_scale;
  c.noise_std = noise_std;
  c.seed = seed;
  return c;
}

std::vector<std::string> data_config_keys() {
  return {"class_count", "task_count",      "train_per_task", "test_per_task",
          "feature_dim", "prototype_scale", "noise_std",      "background",
          "partner",     "seed"};
}

void apply_data_setting(DataSpec& s, const std::string& key, const std::string& raw) {
  const std::string v = kv::trim(raw);
  if (key == "class_count") s.class_count = kv::parse_uint(key, v);
  else if (key == "task_count") s.task_count = kv::parse_uint(key, v);
  else if (key == "train_per_task") s.train_per_task = kv::parse_uint(key, v);
  else if (key == "test_per_task") s.test_per_task = kv::parse_uint(key, v);
  else if (key == "feature_dim") s.feature_dim = kv::parse_uint(key, v);
  else if (key == "prototype_scale") s.prototype_scale = kv::parse_double(key, v);
  else if (key == "noise_std") s.noise_std = kv::parse_double(key, v);
  else if (key == "background") s.background = kv::parse_double(key, v);
  else if (key == "partner") s.partner = kv::parse_double(key, v);
  else if (key == "seed") s.seed = kv::parse_uint(key, v);
  else throw ConfigError("unknown data config key '" + key + "'");
}

void apply_data_config_text(DataSpec& s, const std::string& text) {
  kv::for_each_entry(text,
                     [&](const std::string& k, const std::string& v) { apply_data_setting(s, k, v); });
}

void apply_data_env_overrides(DataSpec& s, const std::string& prefix) {
  for (const auto& key : data_config_keys()) {
    if (const char* v = std::getenv(kv::env_name(prefix, key).c_str())) apply_data_setting(s, key, v);
  }
}

std::string data_config_to_text(const DataSpec& s) {
  std::ostringstream out;
  out << "class_count = " << s.class_count << '\n'
      << "task_count = " << s.task_count << '\n'
      << "train_per_task = " << s.train_per_task << '\n'
      << "test_per_task = " << s.test_per_task << '\n'
      << "feature_dim = " << s.feature_dim << '\n'
      << "prototype_scale = " << kv::format_double(s.prototype_scale) << '\n'
      << "noise_std = " << kv::format_double(s.noise_std) << '\n'
      << "background = " << kv::format_double(s.background) << '\n'
      << "partner = " << kv::format_double(s.partner) << '\n'
      << "seed = " << s.seed << '\n';
  return out.str();
}

std::vector<stream::ClassSet> parse_partition(const std::string& text) {
  std::vector<stream::ClassSet> cells;
  std::stringstream cells_in(text);
  std::string cell;
  while (std::getline(cells_in, cell, ';')) {
    stream::ClassSet ids;
    std::stringstream ids_in(cell);
    std::string id;
    while (std::getline(ids_in, id, ',')) {
      id = kv::trim(id);
      if (id.empty()) throw ConfigError("partition: empty class id in '" + text + "'");
      const auto v = kv::parse_uint("partition", id);
      if (v > 0xffffffffULL) throw ConfigError("partition: class id " + id + " is too large");
      ids.push_back(static_cast<stream::ClassId>(v));
    }
    if (ids.empty()) throw ConfigError("partition: empty task in '" + text + "'");
    cells.push_back(std::move(ids));
  }
  if (cells.empty()) throw ConfigError("partition is empty");
  return cells;
}

std::string format_partition(const std::vector<stream::ClassSet>& partition) {
  std::string out;
  for (std::size_t t = 0; t < partition.size(); ++t) {
    if (t) out += ';';
    for (std::size_t i = 0; i < partition[t].size(); ++i) {
      if (i) out += ',';
      out += std::to_string(partition[t][i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

namespace {

std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf, 12);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

}  // namespace

RunManifest::RunManifest(fs::path dir, std::string command, std::string config_text,
                         std::uint64_t seed)
    : dir_(std::move(dir)),
      command_(std::move(command)),
      config_text_(std::move(config_text)),
      seed_(seed),
      run_id_(hex_id(mix_seed(fnv1a(command_ + '\n' + config_text_), seed))) {
  ensure_dir(dir_);
  flush();
}

void RunManifest::add_file(const fs::path& relative, const std::string& kind) {
  files_.emplace_back(relative.generic_string(), kind);
  flush();
}

void RunManifest::set_note(const std::string& key, const std::string& value) {
  for (auto& [k, v] : notes_) {
    if (k == key) {
      v = value;
      flush();
      return;
    }
  }
  notes_.emplace_back(key, value);
  flush();
}

void RunManifest::verify() const {
  for (const auto& [rel, kind] : files_) {
    const fs::path p = dir_ / rel;
    std::error_code ec;
    const auto size = fs::file_size(p, ec);
    if (ec) throw IoError("manifest lists " + rel + " but it is missing");
    // An empty JSON Lines file is a valid empty corpus.
    if (size == 0 && p.extension() != ".jsonl") throw IoError("output " + rel + " is empty");
    if (p.extension() == ".json") {
      if (!nlohmann::json::accept(read_text(p))) throw DataError("output " + rel + " is not valid JSON");
    }
  }
}

void RunManifest::finish() {
  status_ = "complete";
  flush();
}

void RunManifest::fail(const std::string& message) {
  status_ = "failed";
  error_ = message;
  flush();
}

void RunManifest::flush() const {
  ordered_json j;
  j["run_id"] = run_id_;
  j["command"] = command_;
  j["seed"] = seed_;
  j["status"] = status_;
  if (!error_.empty()) j["error"] = error_;
  j["config"] = config_text_;
  ordered_json notes = ordered_json::object();
  for (const auto& [k, v] : notes_) notes[k] = v;
  j["notes"] = notes;
  ordered_json files = ordered_json::array();
  for (const auto& [rel, kind] : files_) files.push_back({{"path", rel}, {"kind", kind}});
  j["files"] = files;

  const fs::path tmp = dir_ / "manifest.json.tmp";
  write_text(tmp, j.dump(1) + "\n");
  std::error_code ec;
  fs::rename(tmp, path(), ec);
  if (ec) throw IoError("cannot update " + path().string() + ": " + ec.message());
}

void write_artifact(RunManifest& manifest, const fs::path& relative, const std::string& text,
                    const std::string& kind) {
  write_text(manifest.dir() / relative, text);
  manifest.add_file(relative, kind);
}

namespace {

// Runs `body` and maps any escaping error to an exit code, marking the manifest
// (when one exists) as failed.
template <typename Body>
int guarded(std::ostream& err, std::optional<RunManifest>& manifest, Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::exception& ex) {
    const int code = exit_code_for(ex);
    err << "error: " << ex.what() << '\n';
    if (manifest) {
      try {
        manifest->fail(ex.what());
      } catch (const std::exception&) {
      }
    }
    return code;
  }
}

std::vector<std::string> class_names(const stream::ClassSet& ids) {
  std::vector<std::string> names;
  for (auto c : ids) names.push_back("c" + std::to_string(c));
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
  std::optional<RunManifest> manifest;
  return guarded(err, manifest, [&] {
    DataSpec spec;
    if (o.config) apply_data_config_text(spec, read_text(*o.config));
    apply_data_env_overrides(spec);
    if (o.seed) spec.seed = *o.seed;

    const auto streams = stream::generate_synthetic(spec.to_synthetic());
    const std::string text = data_config_to_text(spec);
    manifest.emplace(o.out, "generate", text, spec.seed);

    std::vector<stream::Example> train, test;
    std::vector<stream::ClassSet> partition;
    for (const auto& s : streams) {
      train.insert(train.end(), s.train.begin(), s.train.end());
      test.insert(test.end(), s.test.begin(), s.test.end());
      partition.push_back(s.classes);
    }
    std::ostringstream train_text, test_text;
    stream::write_jsonl(train_text, train);
    stream::write_jsonl(test_text, test);
    write_artifact(*manifest, "data.txt", text, "config");
    write_artifact(*manifest, "train.jsonl", train_text.str(), "dataset");
    write_artifact(*manifest, "test.jsonl", test_text.str(), "dataset");
    manifest->set_note("partition", format_partition(partition));
    manifest->set_note("feature_dim", std::to_string(spec.feature_dim));
    manifest->verify();
    manifest->finish();
    out << "wrote " << train.size() << " train and " << test.size() << " test examples to "
        << o.out.string() << " (partition " << format_partition(partition) << ")\n";
  });
}

// ---------------------------------------------------------------------------
// split

int cmd_split(const SplitOptions& o, std::ostream& out, std::ostream& err) {
  std::optional<RunManifest> manifest;
  return guarded(err, manifest, [&] {
    if (o.partition.has_value() == o.tasks.has_value()) {
      throw ConfigError("split needs exactly one of --partition or --tasks");
    }
    const auto train = stream::read_jsonl(o.train);
    if (train.empty()) throw DataError(o.train.string() + " holds no examples");
    const auto test = o.test ? stream::read_jsonl(*o.test) : std::vector<stream::Example>{};
    for (const auto& e : test) {
      if (e.features.size() != train.front().features.size()) {
        throw DataError("test example '" + e.id + "' has a different feature width");
      }
    }

    std::set<stream::ClassId> observed;
    for (const auto* corpus : {&train, &test})
      for (const auto& e : *corpus) observed.insert(e.labels.begin(), e.labels.end());
    const std::size_t class_count = observed.empty() ? 0 : *observed.rbegin() + 1;

    std::vector<stream::ClassSet> partition;
    if (o.partition) {
      partition = parse_partition(*o.partition);
      for (const auto& cell : partition) {
        for (auto c : cell) {
          if (!observed.count(c)) {
            throw ConfigError("partition names class " + std::to_string(c) +
                              ", which no example carries");
          }
        }
      }
    } else {
      partition = stream::even_partition(class_count, *o.tasks);
    }

    const auto result = stream::split_dataset(train, test, partition);
    std::ostringstream cfg;
    cfg << "train = " << o.train.string() << '\n';
    if (o.test) cfg << "test = " << o.test->string() << '\n';
    cfg << "partition = " << format_partition(partition) << '\n';
    manifest.emplace(o.out, "split", cfg.str(), 0);

    ordered_json doc;
    ordered_json tasks = ordered_json::array();
    for (std::size_t t = 0; t < result.tasks.size(); ++t) {
      const auto& task = result.tasks[t];
      const std::string stem = "task_" + std::to_string(t + 1);
      std::ostringstream tr, te;
      stream::write_jsonl(tr, task.train);
      stream::write_jsonl(te, task.test);
      write_artifact(*manifest, stem + "_train.jsonl", tr.str(), "task-train");
      write_artifact(*manifest, stem + "_test.jsonl", te.str(), "task-test");

      ordered_json entry;
      entry["task"] = task.task_id;
      entry["classes"] = task.classes;
      entry["train"] = stem + "_train.jsonl";
      entry["test"] = stem + "_test.jsonl";
      std::vector<std::string> ids;
      for (const auto& e : task.train) ids.push_back(e.id);
      entry["train_ids"] = ids;
      ids.clear();
      for (const auto& e : task.test) ids.push_back(e.id);
      entry["test_ids"] = ids;
      tasks.push_back(entry);
    }
    doc["tasks"] = tasks;
    ordered_json report = ordered_json::array();
    for (std::size_t t = 0; t < result.report.tasks.size(); ++t) {
      report.push_back({{"task", t + 1},
                        {"special", result.report.tasks[t].special},
                        {"mixed", result.report.tasks[t].mixed}});
    }
    doc["report"] = report;
    doc["total"] = result.report.total();
    write_artifact(*manifest, "split.json", doc.dump(1) + "\n", "split-manifest");
    manifest->verify();
    manifest->finish();

    out << "task  classes            special  mixed\n";
    for (std::size_t t = 0; t < result.tasks.size(); ++t) {
      std::string cls;
      for (auto c : result.tasks[t].classes) cls += (cls.empty() ? "" : ",") + std::to_string(c);
      out << std::left << std::setw(6) << t + 1 << std::setw(19) << cls << std::setw(9)
          << result.report.tasks[t].special << result.report.tasks[t].mixed << '\n';
    }
    out << "total " << result.report.total() << '\n';
  });
}

std::vector<stream::TaskStream> load_split(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "split.json" : path;
  const fs::path dir = file.parent_path();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(file));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(file.string() + ": " + ex.what());
  }
  std::vector<stream::TaskStream> streams;
  try {
    for (const auto& entry : doc.at("tasks")) {
      stream::TaskStream s;
      s.task_id = entry.at("task").get<int>();
      s.classes = entry.at("classes").get<stream::ClassSet>();
      s.train = stream::read_jsonl(dir / entry.at("train").get<std::string>());
      s.test = stream::read_jsonl(dir / entry.at("test").get<std::string>());
      streams.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(file.string() + ": " + ex.what());
  }
  if (streams.empty()) throw DataError(file.string() + " lists no tasks");
  stream::validate_streams(streams);
  return streams;
}

// ---------------------------------------------------------------------------
// train

trainer::TrainConfig resolve_train_config(const TrainOptions& o) {
  trainer::TrainConfig config;
  if (o.benchmark) config = trainer::benchmark_preset(o.seed.value_or(0)).train;
  if (o.config) trainer::apply_config_text(config, read_text(*o.config));
  trainer::apply_env_overrides(config);
  if (o.seed && !o.benchmark) config.seed = *o.seed;
  if (o.mode) config.mode = trainer::parse_mode(*o.mode);
  if (o.ablation) config.ablation = trainer::parse_ablation(*o.ablation);
  if (o.threshold) config.threshold = *o.threshold;
  config.validate();
  return config;
}

std::string summary_table(const trainer::TrainRecord& record, const trainer::TrainConfig& config) {
  const int t = static_cast<int>(record.task_count());
  const auto& last = record.overall.back();
  auto pct = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%7.2f", 100.0 * v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "mode " << trainer::to_string(config.mode) << ", ablation "
      << trainer::to_string(config.ablation) << ", " << t << " tasks\n"
      << "               mAP     CF1     OF1\n"
      << "final      " << pct(last.mean_ap.value_or(0.0)) << ' ' << pct(last.per_class_f1) << ' '
      << pct(last.overall_f1) << '\n'
      << "forgetting " << pct(trainer::forgetting(record, trainer::Metric::kMap, t)) << ' '
      << pct(trainer::forgetting(record, trainer::Metric::kCf1, t)) << ' '
      << pct(trainer::forgetting(record, trainer::Metric::kOf1, t)) << '\n';
  return out.str();
}

namespace {

checkpoint::Bundle model_bundle(const trainer::Trainer& tr) {
  checkpoint::Bundle b;
  checkpoint::put(b, "backbone.", tr.backbone());
  checkpoint::put(b, "graph.", tr.graph_model());
  const auto& h0 = tr.embeddings();
  b.tensors["embeddings"] = h0.rows;
  numerics::Matrix ids(1, h0.class_ids.size());
  for (std::size_t i = 0; i < h0.class_ids.size(); ++i) ids(0, i) = h0.class_ids[i];
  b.tensors["class_ids"] = ids;
  b.tensors["acm"] = tr.task_acms().back().raw();
  b.scalars["acm.boundary"] = static_cast<double>(tr.task_acms().back().boundary());
  b.scalars["task"] = tr.task();
  return b;
}

}  // namespace

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  std::optional<RunManifest> manifest;
  return guarded(err, manifest, [&] {
    if (o.benchmark == o.data.has_value()) {
      throw ConfigError("train needs exactly one of --data or --preset benchmark");
    }
    const trainer::TrainConfig config = resolve_train_config(o);
    std::vector<stream::TaskStream> streams;
    if (o.benchmark) {
      streams = stream::generate_synthetic(trainer::benchmark_preset(o.seed.value_or(0)).data);
    } else {
      streams = load_split(*o.data);
    }

    const std::string text = trainer::config_to_text(config);
    manifest.emplace(o.out, "train", text, config.seed);
    manifest->set_note("data", o.benchmark ? std::string("benchmark") : o.data->string());
    write_artifact(*manifest, "config.txt", text, "config");

    trainer::RunResult result;
    try {
      result = trainer::run(streams, config, [&](int t, const trainer::Trainer& tr) {
        const auto& a = tr.task_acms().back();
        const auto names = class_names(tr.seen_classes());
        const std::string stem = "acm/task_" + std::to_string(t);
        write_artifact(*manifest, stem + ".csv", acm::to_csv(a, names), "acm-csv");
        write_artifact(*manifest, stem + ".json", acm::to_json(a, names, t) + "\n", "acm-json");
        const fs::path ckpt = "checkpoints/task_" + std::to_string(t) + ".json";
        write_artifact(*manifest, ckpt, checkpoint::encode(model_bundle(tr)) + "\n", "checkpoint");
        manifest->set_note("completed_tasks", std::to_string(t));
      });
    } catch (const NumericError& ex) {
      std::ostringstream diag;
      diag << ex.what() << " (learning_rate " << kv::format_double(config.adam.learning_rate)
           << ", lambda_gph " << kv::format_double(config.weights.gph)
           << "; lower the learning rate or the loss weights)";
      throw NumericError(diag.str());
    }

    if (result.max_touches != 1) {
      throw DataError("single-pass contract violated: an example was used " +
                      std::to_string(result.max_touches) + " times");
    }
    const auto& rec = result.record;
    write_artifact(*manifest, "metrics.csv", rec.metrics_csv(), "metrics-csv");
    write_artifact(*manifest, "metrics.json", rec.metrics_json() + "\n", "metrics-json");
    write_artifact(*manifest, "losses.csv", rec.losses_csv(), "losses-csv");

    const int t = static_cast<int>(rec.task_count());
    ordered_json summary;
    summary["mode"] = trainer::to_string(config.mode);
    summary["ablation"] = trainer::to_string(config.ablation);
    summary["tasks"] = t;
    summary["examples_seen"] = result.examples_seen;
    summary["final"] = {{"mAP", rec.final_map()},
                        {"CF1", rec.overall.back().per_class_f1},
                        {"OF1", rec.overall.back().overall_f1}};
    summary["forgetting"] = {{"mAP", trainer::forgetting(rec, trainer::Metric::kMap, t)},
                             {"CF1", trainer::forgetting(rec, trainer::Metric::kCf1, t)},
                             {"OF1", trainer::forgetting(rec, trainer::Metric::kOf1, t)}};
    write_artifact(*manifest, "summary.json", summary.dump(1) + "\n", "summary");
    manifest->verify();
    manifest->finish();
    out << "run " << manifest->run_id() << " -> " << o.out.string() << '\n'
        << summary_table(rec, config);
  });
}

// ---------------------------------------------------------------------------
// export-acm

int cmd_export_acm(const ExportOptions& o, std::ostream& out, std::ostream& err) {
  std::optional<RunManifest> manifest;
  return guarded(err, manifest, [&] {
    const fs::path acm_dir = o.run / "acm";
    std::vector<int> tasks;
    if (o.task) {
      tasks.push_back(*o.task);
    } else {
      for (int t = 1; fs::exists(acm_dir / ("task_" + std::to_string(t) + ".json")); ++t)
        tasks.push_back(t);
      if (tasks.empty()) throw ConfigError(o.run.string() + " holds no stored correlation matrices");
    }
    for (int t : tasks) {
      if (!fs::exists(acm_dir / ("task_" + std::to_string(t) + ".json"))) {
        throw ConfigError("run " + o.run.string() + " has no correlation matrix for task " +
                          std::to_string(t));
      }
    }
    const fs::path dest = o.out.value_or(o.run / "export");
    manifest.emplace(dest, "export-acm", "run = " + o.run.string() + "\n", 0);
    for (int t : tasks) {
      const fs::path src = acm_dir / ("task_" + std::to_string(t) + ".json");
      const std::string text = read_text(src);
      const auto a = acm::from_json(text);
      std::vector<std::string> names;
      try {
        names = nlohmann::json::parse(text).at("classes").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& ex) {
        throw DataError(src.string() + ": " + ex.what());
      }
      const std::string stem = "acm_task_" + std::to_string(t);
      write_artifact(*manifest, stem + ".csv", acm::to_csv(a, names), "acm-csv");
      write_artifact(*manifest, stem + ".json", acm::to_json(a, names, t) + "\n", "acm-json");
      out << "task " << t << ": " << a.size() << "x" << a.size() << " (" << a.boundary()
          << " old classes)\n";
    }
    manifest->verify();
    manifest->finish();
  });
}

}  // namespace agcn::cli
