#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agcn/stream.hpp"
#include "agcn/trainer.hpp"

namespace agcn::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,   // bad flags, config, schema or data
  kExitNumeric = 3,  // non-finite loss or parameters
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& ex) noexcept;

/// Parameters of the synthetic corpus written by `generate`. The defaults are
/// the bundled benchmark.
struct DataSpec {
  std::size_t class_count = 12;
  std::size_t task_count = 4;
  std::size_t train_per_task = 1000;
  std::size_t test_per_task = 400;
  std::size_t feature_dim = 32;
  double prototype_scale = 0.6;
  double noise_std = 0.3;
  double background = 0.03;  // P(C_i | C_j) for unrelated pairs
  double partner = 0.9;      // P(C_i | C_j) for the paired cross-task classes
  std::uint64_t seed = trainer::kBenchmarkDataSeed;

  stream::SyntheticConfig to_synthetic() const;
};

std::vector<std::string> data_config_keys();
void apply_data_setting(DataSpec& spec, const std::string& key, const std::string& value);
void apply_data_config_text(DataSpec& spec, const std::string& text);
void apply_data_env_overrides(DataSpec& spec, const std::string& prefix = "AGCN_");
std::string data_config_to_text(const DataSpec& spec);

/// "0,1,2;3,4,5" -> {{0,1,2},{3,4,5}}. Throws ConfigError on malformed input.
std::vector<stream::ClassSet> parse_partition(const std::string& text);
std::string format_partition(const std::vector<stream::ClassSet>& partition);

/// The manifest of a run directory.
///
/// manifest.json is rewritten (via a temporary file and a rename) every time a
/// file is added, so an interrupted command still leaves a parseable manifest
/// with status "running" that lists everything written so far.
class RunManifest {
 public:
  RunManifest(fs::path dir, std::string command, std::string config_text, std::uint64_t seed);

  const fs::path& dir() const noexcept { return dir_; }
  const std::string& run_id() const noexcept { return run_id_; }
  fs::path path() const { return dir_ / "manifest.json"; }

  /// Records `relative` (a path under dir()) and rewrites the manifest.
  void add_file(const fs::path& relative, const std::string& kind);
  void set_note(const std::string& key, const std::string& value);
  /// Checks every listed file exists, is non-empty, and parses if it is JSON.
  /// Throws IoError / DataError.
  void verify() const;
  void finish();
  void fail(const std::string& message);

  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }

 private:
  void flush() const;

  fs::path dir_;
  std::string command_;
  std::string config_text_;
  std::uint64_t seed_;
  std::string run_id_;
  std::string status_ = "running";
  std::string error_;
  std::vector<std::pair<std::string, std::string>> notes_;
  std::vector<std::pair<std::string, std::string>> files_;  // path, kind
};

/// Writes `text` to dir/relative (creating parents) and records it.
void write_artifact(RunManifest& manifest, const fs::path& relative, const std::string& text,
                    const std::string& kind);

struct GenerateOptions {
  fs::path out;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
};

/// Synthetic corpus: train.jsonl and test.jsonl (all tasks pooled), the
/// data config, and the even class partition recorded in the manifest.
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

struct SplitOptions {
  fs::path train;
  std::optional<fs::path> test;
  std::optional<std::string> partition;  // "0,1;2,3"
  std::optional<std::size_t> tasks;      // even partition over the observed classes
  fs::path out;
};

/// Per-task JSONL files plus split.json with each task's classes, example ids,
/// and the special/mixed report.
int cmd_split(const SplitOptions& options, std::ostream& out, std::ostream& err);

/// Loads the task streams described by a split.json (or a directory holding one).
std::vector<stream::TaskStream> load_split(const fs::path& path);

struct TrainOptions {
  std::optional<fs::path> data;  // split.json or its directory
  bool benchmark = false;        // use the bundled benchmark instead of --data
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> ablation;
  std::optional<double> threshold;
  fs::path out;
};

/// Resolves the training config: defaults (or the benchmark preset), then the
/// config file, then AGCN_* environment variables, then explicit flags.
trainer::TrainConfig resolve_train_config(const TrainOptions& options);

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);

/// Table-style summary: final mAP/CF1/OF1 and forgetting for each, in percent.
std::string summary_table(const trainer::TrainRecord& record, const trainer::TrainConfig& config);

struct ExportOptions {
  fs::path run;
  std::optional<int> task;  // all stored tasks when absent
  std::optional<fs::path> out;
};

int cmd_export_acm(const ExportOptions& options, std::ostream& out, std::ostream& err);

}  // namespace agcn::cli
