#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crr/prompt_builder.hpp"

namespace crr {

struct SampleRequest {
  std::string prompt;
  double temperature = 0.4;
  int max_tokens = 300;
  int n = 1;
  std::vector<std::string> stop_sequences;
  std::optional<std::uint64_t> seed;  // honoured by the mock backend only

  /// Throws PreconditionError.
  void validate() const;
};

struct Token {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  double logprob = 0.0;

  bool operator==(const Token&) const = default;
};

/// Text with its backend tokenization. `tokens` is empty when the backend
/// returned no log-probabilities.
struct ScoredText {
  std::string text;
  std::vector<Token> tokens;

  bool has_logprobs() const { return !tokens.empty(); }
  double total_logprob() const;
  /// Tokens tile the text contiguously and every logprob is <= 0.
  /// Throws ValidationError.
  void validate() const;

  bool operator==(const ScoredText&) const = default;
};

/// Builds a ScoredText from consecutive token strings.
ScoredText make_scored_text(std::span<const std::string> pieces, std::span<const double> logprobs);

/// Tokens whose char_start lies in [span.start, span.end). Throws
/// PreconditionError if the span is out of range or selects no token.
ChannelScore aggregate_span(const ScoredText& scored, Span span);

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string_view text, std::span<const std::string> stops);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;

  /// Stable name used in cache keys and run manifests.
  virtual std::string identity() const = 0;

  /// `request.n` completions, each cut at its first stop sequence.
  virtual std::vector<ScoredText> sample(const SampleRequest& request) = 0;

  /// Log-probabilities of `continuation` given `prompt`. The returned
  /// tokens cover exactly the continuation; offsets are relative to it.
  virtual ScoredText score_continuation(std::string_view prompt,
                                        std::string_view continuation) = 0;
};

/// Scores the reviewer segment of an inverted prompt by splitting it at the
/// span start. Returns sum and count over the instruction tokens.
ChannelScore score_prompt_span(CompletionBackend& backend, const PromptPackage& prompt);

}  // namespace crr
