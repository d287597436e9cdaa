#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "crr/lm_gateway.hpp"

namespace crr {

/// Adds `bias` to every non-whitespace token logprob of a continuation when
/// all of the given conditions hold. Empty conditions are ignored.
struct MockRule {
  std::string prompt_contains;
  std::string prompt_excludes;
  std::string continuation_contains;
  std::string continuation_excludes;
  double bias = 0.0;
};

struct MockProgram {
  std::string text;
  double weight = 1.0;
};

/// Programs offered for sampling to any prompt containing `match`.
struct MockProgramSet {
  std::string match;
  std::vector<MockProgram> programs;
};

/// Scoring model of the mock backend. A token already present in the
/// preceding context (prompt plus earlier continuation, case-insensitive)
/// scores `seen_logprob`, otherwise `unseen_logprob`; a deterministic jitter
/// in [-jitter, 0] is added, then matching rule biases.
struct MockScript {
  std::string name = "mock";
  double seen_logprob = -0.3;
  double unseen_logprob = -2.5;
  double whitespace_logprob = -0.05;
  double jitter = 0.5;
  std::vector<MockRule> rules;
  std::vector<MockProgramSet> program_sets;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Whitespace runs, identifier runs, and single punctuation characters.
std::vector<std::string> mock_tokenize(std::string_view text);

/// Deterministic in-process backend: a pure function of its script and
/// each request. Thread-safe.
class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(MockScript script = {});

  std::string identity() const override;
  std::vector<ScoredText> sample(const SampleRequest& request) override;
  ScoredText score_continuation(std::string_view prompt, std::string_view continuation) override;

  std::size_t sample_calls() const { return sample_calls_.load(); }
  std::size_t score_calls() const { return score_calls_.load(); }
  const MockScript& script() const { return script_; }

 private:
  ScoredText score_unchecked(std::string_view prompt, std::string_view continuation) const;

  MockScript script_;
  std::atomic<std::size_t> sample_calls_{0};
  std::atomic<std::size_t> score_calls_{0};
};

}  // namespace crr
