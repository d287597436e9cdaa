#pragma once

#include <span>
#include <string_view>

#include "crr/evaluation.hpp"
#include "crr/lm_gateway.hpp"
#include "crr/prompt_builder.hpp"
#include "crr/types.hpp"

namespace crr {

struct ScoringOptions {
  PromptOptions prompt;
  bool score_prior = false;  // ignored for tagged tasks
  std::size_t workers = 0;   // 0 = hardware concurrency
};

/// log p(y | x) of `program` under the coder prompt.
ChannelScore score_coder(CompletionBackend& backend, const TaskInstance& task,
                         std::string_view program, const PromptOptions& options = {});

/// log p(x | y) over the instruction span of the inverted prompt.
ChannelScore score_reviewer(CompletionBackend& backend, const TaskInstance& task,
                            std::string_view program, const PromptOptions& options = {});

/// log p(y) with the docstring removed from the header.
ChannelScore score_prior(CompletionBackend& backend, const TaskInstance& task,
                         std::string_view program, const PromptOptions& options = {});

/// Fills ScoreBundles in place. Coder (and prior) use the raw text of every
/// non-blank candidate; the reviewer uses canonical text and skips rejected
/// candidates. Run apply_rejection first.
void score_pool(CompletionBackend& backend, const TaskInstance& task, std::span<Candidate> pool,
                const ScoringOptions& options = {});

/// Sampled candidates plus one construct of each degenerate kind, scored on
/// raw text with no rejection. Construct indices follow the sampled ones.
ProbePool build_probe_pool(CompletionBackend& backend, const TaskInstance& task,
                           std::span<const Candidate> sampled, const ScoringOptions& options = {});

}  // namespace crr
