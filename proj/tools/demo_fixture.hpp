#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "crr/executor.hpp"
#include "crr/mock_backend.hpp"
#include "crr/types.hpp"

namespace crr::demo {

/// Small Python function-completion corpus with a scripted backend and
/// scripted execution outcomes. Each task samples from correct bodies, a
/// plausible wrong body, a short wrong body and a bare `pass`. Comment-only
/// continuations are penalised under the coder prompt. Only the first task
/// has a body that raises.
struct DemoFixture {
  std::vector<TaskInstance> tasks;
  MockScript script;
  std::vector<nlohmann::json> executions;  // executor fixture lines

  MockExecutor executor() const;
  /// corpus.jsonl, mock_script.json, executions.jsonl and config.json.
  void write(const std::filesystem::path& dir) const;
};

DemoFixture make_demo_fixture(int n_tasks = 10);

/// Text of the body that raises in the first task.
std::string erroring_body();

}  // namespace crr::demo
