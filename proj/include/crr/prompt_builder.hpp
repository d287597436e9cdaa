#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "crr/types.hpp"

namespace crr {

enum class Channel { coder, reviewer, prior };

/// Half-open character range [start, end) into a prompt string.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool empty() const { return start >= end; }
  std::size_t size() const { return empty() ? 0 : end - start; }
  bool operator==(const Span&) const = default;
};

struct PromptPackage {
  std::string text;
  // Empty (at end of text) for coder and prior prompts; for the reviewer it
  // covers exactly the test instruction.
  Span scored_span;
  Channel channel = Channel::coder;
  std::vector<std::string> stop_sequences;

  std::string_view scored_text() const {
    return std::string_view(text).substr(scored_span.start, scored_span.size());
  }
};

struct TagSet {
  std::string context = "info";
  std::string instruction = "text";
  std::string program = "code";
};

struct PromptOptions {
  TagSet tags;
  std::string reviewer_cue = "write the docstring for the above function";
  std::string comment_marker = "# ";
};

PromptPackage build_coder_prompt(const TaskInstance& task, const PromptOptions& options = {});

/// Inverted prompt scoring the task instruction given the candidate's
/// canonical text. Throws PreconditionError for rejected or empty candidates.
PromptPackage build_reviewer_prompt(const TaskInstance& task, const Candidate& candidate,
                                    const PromptOptions& options = {});

/// Same layout for an arbitrary program text.
PromptPackage build_reviewer_prompt(const TaskInstance& task, std::string_view program,
                                    const PromptOptions& options = {});

/// Function header with the docstring removed; the body is then scored as
/// log p(y). Function-completion tasks only.
PromptPackage build_prior_prompt(const TaskInstance& task, const PromptOptions& options = {});

std::vector<std::string> function_completion_stops();

// Python function header helpers.

struct FunctionHeader {
  std::size_t begin = 0;  // offset of the `def` line
  std::size_t end = 0;    // one past the header's trailing newline (or EOF)
  std::string name;
  std::string indent;  // indentation of the `def` line
};

std::size_t count_function_headers(std::string_view source);

/// Throws ValidationError unless exactly one header is present.
FunctionHeader find_function_header(std::string_view source);

/// Removes a docstring literal directly beneath the function header.
/// Returns the input unchanged when there is none.
std::string strip_docstring(std::string_view context);

}  // namespace crr
