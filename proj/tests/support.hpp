#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "crr/types.hpp"

namespace testing {

inline crr::TaskInstance function_task(std::string id = "t0") {
  crr::TaskInstance t;
  t.task_id = std::move(id);
  t.instruction = "Return the decimal part of number.";
  t.context = "import math\n\n\ndef truncate_number(number: float) -> float:\n";
  t.language = crr::Language::python_function;
  t.prompt_style = crr::PromptStyle::function_completion;
  t.visible_test = "truncate_number(3.5)";
  t.hidden_tests = {"assert truncate_number(3.5) == 0.5"};
  return t;
}

inline crr::TaskInstance tagged_task(int demos = 3) {
  crr::TaskInstance t;
  t.task_id = "bash/1";
  t.instruction = "list all files";
  t.context = "bash";
  t.language = crr::Language::tagged_generic;
  t.prompt_style = crr::PromptStyle::tagged;
  for (int i = 0; i < demos; ++i) {
    t.demos.push_back({"bash", "show line " + std::to_string(i), "sed -n " + std::to_string(i) + "p f"});
  }
  t.hidden_tests = {"ls -a"};
  return t;
}

inline crr::Candidate scored(int index, double coder, double reviewer, int coder_len = 10, int reviewer_len = 5,
                             std::optional<double> prior = std::nullopt) {
  crr::Candidate c;
  c.task_id = "t0";
  c.index = index;
  c.raw_text = "    return " + std::to_string(index) + "\n";
  c.canonical_text = c.raw_text;
  crr::ScoreBundle b;
  b.coder = crr::ChannelScore{coder, coder_len};
  b.reviewer = crr::ChannelScore{reviewer, reviewer_len};
  if (prior) b.prior = crr::ChannelScore{*prior, coder_len};
  c.scores = b;
  return c;
}

inline crr::ExecutionOutcome ok(std::string output) {
  return {crr::ExecStatus::ok, std::move(output), 1, std::nullopt};
}

inline crr::ExecutionOutcome failed(crr::ExecStatus s = crr::ExecStatus::runtime_error) {
  return {s, std::nullopt, 1, std::string("ValueError")};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("crr-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
