#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crr/types.hpp"

namespace crr {

inline constexpr int kDefaultTimeoutMs = 10000;

/// One request of the runner protocol, sent as a single JSON object on the
/// runner's stdin.
struct RunnerRequest {
  std::string context;
  std::string body;
  std::string test;
  int timeout_ms = kDefaultTimeoutMs;

  nlohmann::json to_json() const;
};

/// Parses one runner stdout line. Throws ValidationError on protocol
/// violations.
ExecutionOutcome parse_runner_output(std::string_view line);

class Executor {
 public:
  virtual ~Executor() = default;

  /// Runs context + candidate + visible test. Throws PreconditionError when
  /// the task has no visible test.
  virtual ExecutionOutcome execute(const Candidate& candidate, const TaskInstance& task,
                                   int timeout_ms) = 0;

  /// Hidden-test verdict. Evaluation-side only.
  virtual bool passes_hidden_tests(const Candidate& candidate, const TaskInstance& task,
                                   int timeout_ms) = 0;
};

/// Spawns `command` once per request and speaks the JSON protocol over its
/// stdin/stdout. A wall-clock guard of timeout_ms + grace kills runners that
/// fail to enforce their own alarm.
class SubprocessExecutor : public Executor {
 public:
  explicit SubprocessExecutor(std::vector<std::string> command, int grace_ms = 500);

  ExecutionOutcome execute(const Candidate& candidate, const TaskInstance& task,
                           int timeout_ms) override;
  bool passes_hidden_tests(const Candidate& candidate, const TaskInstance& task,
                           int timeout_ms) override;

  ExecutionOutcome run(const RunnerRequest& request);

 private:
  std::vector<std::string> command_;
  int grace_ms_;
};

/// Scripted outcomes loaded from a line-delimited fixture. Each line holds
/// task_id, either `index` or `text` (raw candidate text), an `outcome`
/// object and an optional `correct` verdict. Index entries win over text
/// entries. Unscripted candidates yield sandbox_failure and verdict false.
class MockExecutor : public Executor {
 public:
  struct Entry {
    ExecutionOutcome outcome;
    std::optional<bool> correct;
  };

  MockExecutor() = default;
  static MockExecutor load(const std::filesystem::path& path);

  void script_index(const std::string& task_id, int index, Entry entry);
  void script_text(const std::string& task_id, const std::string& raw_text, Entry entry);

  ExecutionOutcome execute(const Candidate& candidate, const TaskInstance& task,
                           int timeout_ms) override;
  bool passes_hidden_tests(const Candidate& candidate, const TaskInstance& task,
                           int timeout_ms) override;

 private:
  const Entry* find(const Candidate& candidate) const;

  std::map<std::pair<std::string, int>, Entry> by_index_;
  std::map<std::pair<std::string, std::string>, Entry> by_text_;
};

struct FilterResult {
  std::vector<Candidate> kept;
  bool fallback = false;  // nothing executed cleanly; input returned whole
};

/// Keeps candidates whose execution status is ok (timeouts count as errors).
/// Falls back to the whole input when that would leave nothing.
FilterResult executability_filter(std::span<const Candidate> pool);

/// Executes every non-rejected candidate of a pool on up to `workers`
/// threads, storing outcomes in place.
void execute_pool(Executor& executor, std::span<Candidate> pool, const TaskInstance& task,
                  int timeout_ms, std::size_t workers);

}  // namespace crr
