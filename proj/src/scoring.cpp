#include "crr/scoring.hpp"

#include <algorithm>
#include <cctype>

#include "crr/degeneracy.hpp"
#include "crr/parallel.hpp"

namespace crr {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

ChannelScore score_whole(CompletionBackend& backend, const PromptPackage& prompt, std::string_view program) {
  ScoredText scored = backend.score_continuation(prompt.text, program);
  return aggregate_span(scored, Span{0, scored.text.size()});
}

void fill(CompletionBackend& backend, const TaskInstance& task, Candidate& c, const ScoringOptions& options,
          bool reviewer_on_raw) {
  ScoreBundle bundle = c.scores.value_or(ScoreBundle{});
  if (!blank(c.raw_text)) {
    bundle.coder = score_coder(backend, task, c.raw_text, options.prompt);
    if (options.score_prior && task.prompt_style == PromptStyle::function_completion) {
      bundle.prior = score_prior(backend, task, c.raw_text, options.prompt);
    }
  }
  const std::string& reviewed = reviewer_on_raw ? c.raw_text : c.canonical_text;
  if ((reviewer_on_raw || !c.rejection) && !blank(reviewed)) {
    bundle.reviewer = score_reviewer(backend, task, reviewed, options.prompt);
  }
  c.scores = bundle;
}

}  // namespace

ChannelScore score_coder(CompletionBackend& backend, const TaskInstance& task, std::string_view program,
                         const PromptOptions& options) {
  return score_whole(backend, build_coder_prompt(task, options), program);
}

ChannelScore score_reviewer(CompletionBackend& backend, const TaskInstance& task, std::string_view program,
                            const PromptOptions& options) {
  return score_prompt_span(backend, build_reviewer_prompt(task, program, options));
}

ChannelScore score_prior(CompletionBackend& backend, const TaskInstance& task, std::string_view program,
                         const PromptOptions& options) {
  return score_whole(backend, build_prior_prompt(task, options), program);
}

void score_pool(CompletionBackend& backend, const TaskInstance& task, std::span<Candidate> pool,
                const ScoringOptions& options) {
  const std::size_t workers = options.workers ? options.workers : default_workers();
  parallel_for(pool.size(), workers, [&](std::size_t i) { fill(backend, task, pool[i], options, false); });
}

ProbePool build_probe_pool(CompletionBackend& backend, const TaskInstance& task,
                           std::span<const Candidate> sampled, const ScoringOptions& options) {
  ProbePool probe;
  int next = 0;
  for (const auto& c : sampled) {
    Candidate copy = c;
    copy.rejection.reset();
    copy.scores.reset();
    probe.candidates.push_back(std::move(copy));
    next = std::max(next, c.index + 1);
  }
  for (auto kind : kDegenerateKinds) {
    Candidate d = make_degenerate(kind, task, next);
    probe.probes[kind] = next++;
    probe.candidates.push_back(std::move(d));
  }
  const std::size_t workers = options.workers ? options.workers : default_workers();
  parallel_for(probe.candidates.size(), workers,
               [&](std::size_t i) { fill(backend, task, probe.candidates[i], options, true); });
  return probe;
}

}  // namespace crr
