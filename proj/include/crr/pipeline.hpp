#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crr/cached_backend.hpp"
#include "crr/degeneracy.hpp"
#include "crr/evaluation.hpp"
#include "crr/executor.hpp"
#include "crr/lm_gateway.hpp"
#include "crr/rerankers.hpp"

namespace crr {

struct RunConfig {
  std::filesystem::path corpus;
  std::string backend;  // http(s) endpoint URL, or path to a mock script
  std::string model;    // forwarded to http endpoints
  std::filesystem::path mock;          // scripted execution outcomes
  std::vector<std::string> runner;     // sandbox runner command
  std::vector<std::string> methods;    // empty = default_methods()
  double alpha = 0.5;
  bool exec_filter = false;
  int n_samples = 125;
  int sample_batch = 25;
  double temperature = 0.4;
  int max_tokens = 300;
  RejectionConfig rejection;
  int subsample = 25;
  int trials = 50;
  std::uint64_t seed = 0;
  std::vector<double> alpha_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<int> curve_sizes = {1, 5, 10, 25, 50, 125};
  bool probes = true;         // score degenerate-construct pools for MRR
  int probe_samples = 25;
  std::string metric = "correct";  // or "bleu" against hidden_tests[0]
  std::filesystem::path run_dir = "run";
  int timeout_ms = kDefaultTimeoutMs;
  std::size_t workers = 0;

  /// Throws ValidationError.
  void validate() const;
  std::vector<RankerSpec> rankers() const;
  EvalConfig eval_config() const;

  nlohmann::json to_json() const;
  /// Keys mirror the CLI flags; absent keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig load(const std::filesystem::path& path, RunConfig base);
};

struct SelectionRecord {
  std::string task_id;
  std::string method;
  int selected = -1;
  double score = 0.0;
  bool filter_fallback = false;
  bool rejection_fallback = false;

  nlohmann::json to_json() const;
};

struct StageStats {
  int tasks = 0;
  int skipped = 0;  // already complete in the run directory
};

/// Staged pipeline over a run directory:
///   corpus.jsonl     copy of the input corpus
///   config.json      effective configuration of the last command
///   manifest.json    sampling parameters and backend identity
///   cache/           content-addressed backend responses
///   pools/<task>.jsonl, probes/<task>.json
///   selections.jsonl, report.json, report.csv
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);
  /// Uses caller-owned backend and executor (either may be null to fall
  /// back to the configured ones).
  Pipeline(RunConfig config, CompletionBackend* backend, Executor* executor);
  ~Pipeline();

  StageStats sample();
  StageStats score();
  StageStats execute();
  std::vector<SelectionRecord> rerank();
  EvalReport evaluate();
  EvalReport run();

  const RunConfig& config() const { return config_; }
  std::vector<TaskInstance> tasks() const;
  std::filesystem::path pool_path(const std::string& task_id) const;
  std::filesystem::path probe_path(const std::string& task_id) const;
  std::vector<Candidate> load_task_pool(const TaskInstance& task) const;
  CachedBackend* cache() { return cached_.get(); }

 private:
  CompletionBackend& backend();
  Executor& executor();
  void record_config() const;
  nlohmann::json sampling_manifest(const std::vector<TaskInstance>& tasks);

  RunConfig config_;
  CompletionBackend* backend_ = nullptr;
  Executor* executor_ = nullptr;
  std::unique_ptr<CompletionBackend> owned_backend_;
  std::unique_ptr<Executor> owned_executor_;
  std::unique_ptr<CachedBackend> cached_;
};

/// File-name stem for a task: sanitized id plus a short hash.
std::string task_file_stem(const std::string& task_id);

}  // namespace crr
