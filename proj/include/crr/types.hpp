#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crr {

enum class Language { python_function, tagged_generic };
enum class PromptStyle { function_completion, tagged };
enum class Rejection { empty, trivial, repetitive };
enum class ExecStatus { ok, runtime_error, timeout, sandbox_failure };

std::string_view to_string(Language v);
std::string_view to_string(PromptStyle v);
std::string_view to_string(Rejection v);
std::string_view to_string(ExecStatus v);

// Parsers throw ValidationError on unknown names.
Language parse_language(std::string_view s);
PromptStyle parse_prompt_style(std::string_view s);
Rejection parse_rejection(std::string_view s);
ExecStatus parse_exec_status(std::string_view s);

struct DemoExample {
  std::string context;
  std::string instruction;
  std::string program;

  bool operator==(const DemoExample&) const = default;
};

struct TaskInstance {
  std::string task_id;
  std::string instruction;
  std::string context;
  std::vector<DemoExample> demos;
  Language language = Language::python_function;
  std::optional<std::string> visible_test;
  // Correctness oracle. Only evaluation-side code reads these.
  std::vector<std::string> hidden_tests;
  PromptStyle prompt_style = PromptStyle::function_completion;

  bool operator==(const TaskInstance&) const = default;
};

/// Sum of token log-probabilities over a scored segment and its token count.
struct ChannelScore {
  double logp = 0.0;
  int len = 0;

  bool operator==(const ChannelScore&) const = default;
};

/// Likelihood aggregates per channel: log p(y|x), log p(x|y), log p(y).
struct ScoreBundle {
  std::optional<ChannelScore> coder;
  std::optional<ChannelScore> reviewer;
  std::optional<ChannelScore> prior;

  bool operator==(const ScoreBundle&) const = default;
};

struct ExecutionOutcome {
  ExecStatus status = ExecStatus::sandbox_failure;
  std::optional<std::string> output;  // present iff status == ok
  std::int64_t duration_ms = 0;
  std::optional<std::string> detail;

  bool operator==(const ExecutionOutcome&) const = default;
};

struct Candidate {
  std::string task_id;
  int index = 0;
  std::string raw_text;
  std::string canonical_text;
  std::optional<Rejection> rejection;
  std::optional<ScoreBundle> scores;
  std::optional<ExecutionOutcome> execution;
  std::optional<bool> correct;

  bool operator==(const Candidate&) const = default;
};

}  // namespace crr
