#include "crr/lm_gateway.hpp"

#include <cmath>

#include "crr/errors.hpp"

namespace crr {

void SampleRequest::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw PreconditionError("temperature must lie in [0, 2]");
  }
  if (max_tokens < 1) throw PreconditionError("max_tokens must be >= 1");
  if (n < 1) throw PreconditionError("n must be >= 1");
}

double ScoredText::total_logprob() const {
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return sum;
}

void ScoredText::validate() const {
  std::size_t pos = 0;
  for (const auto& t : tokens) {
    if (t.char_start != pos || t.char_end != pos + t.text.size() ||
        text.compare(pos, t.text.size(), t.text) != 0) {
      throw ValidationError("token spans do not tile the text");
    }
    if (!(t.logprob <= 0.0) || !std::isfinite(t.logprob)) {
      throw ValidationError("token logprob must be finite and <= 0");
    }
    pos = t.char_end;
  }
  if (!tokens.empty() && pos != text.size()) {
    throw ValidationError("tokens do not cover the whole text");
  }
}

ScoredText make_scored_text(std::span<const std::string> pieces, std::span<const double> logprobs) {
  if (pieces.size() != logprobs.size()) {
    throw ValidationError("token and logprob arrays differ in length");
  }
  ScoredText out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    Token t{pieces[i], out.text.size(), out.text.size() + pieces[i].size(), logprobs[i]};
    out.text += pieces[i];
    out.tokens.push_back(std::move(t));
  }
  return out;
}

ChannelScore aggregate_span(const ScoredText& scored, Span span) {
  if (span.end > scored.text.size() || span.start > span.end) {
    throw PreconditionError("span lies outside the scored text");
  }
  ChannelScore out;
  for (const auto& t : scored.tokens) {
    if (t.char_start >= span.start && t.char_start < span.end) {
      out.logp += t.logprob;
      ++out.len;
    }
  }
  if (out.len == 0) throw PreconditionError("span selects no tokens");
  return out;
}

std::string truncate_at_stop(std::string_view text, std::span<const std::string> stops) {
  std::size_t cut = text.size();
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    std::size_t at = text.find(stop);
    if (at != std::string_view::npos) cut = std::min(cut, at);
  }
  return std::string(text.substr(0, cut));
}

ChannelScore score_prompt_span(CompletionBackend& backend, const PromptPackage& prompt) {
  if (prompt.scored_span.empty()) throw PreconditionError("prompt has no scored span");
  std::string_view text = prompt.text;
  ScoredText scored = backend.score_continuation(text.substr(0, prompt.scored_span.start),
                                                 text.substr(prompt.scored_span.start));
  return aggregate_span(scored, {0, prompt.scored_span.size()});
}

}  // namespace crr
