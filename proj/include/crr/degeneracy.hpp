#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "crr/types.hpp"

namespace crr {

struct RejectionConfig {
  // Reject when raw bytes / zlib bytes exceeds this. 50 lines printing 1..50
  // at column 0 compress by ~4.06x.
  double compress_ratio_threshold = 4.0;
  bool trivial_patterns_enabled = true;  // function-completion corpora only

  /// Throws ValidationError unless threshold > 1.
  void validate() const;
};

inline constexpr std::string_view kCanonicalFunctionName = "candidate_fn";

/// UTF-8 byte length over zlib-compressed length (default level).
double compression_ratio(std::string_view text);

/// `empty` for whitespace-only canonical text; `trivial` for a
/// function-completion body made only of bare `return` / `pass` statements.
std::optional<Rejection> reject_empty_or_trivial(const Candidate& candidate,
                                                 const TaskInstance& task,
                                                 const RejectionConfig& config = {});

std::optional<Rejection> reject_repetitive(const Candidate& candidate,
                                           const RejectionConfig& config = {});

/// Strips comments and docstring statements, blanks string arguments of
/// print calls and assert messages, drops lines left empty, and renames the
/// task's function to `candidate_fn`. Returns nullopt when the source does
/// not lex. Idempotent. Non-Python tasks are returned unchanged.
std::optional<std::string> try_canonicalize(std::string_view source, const TaskInstance& task);

/// As try_canonicalize, falling back to the source unchanged.
std::string canonicalize(std::string_view source, const TaskInstance& task);

/// Canonicalizes, then checks empty/trivial on the canonical text and
/// repetition on the raw text. Writes canonical_text and rejection.
std::optional<Rejection> apply_rejection(Candidate& candidate, const TaskInstance& task,
                                         const RejectionConfig& config = {});

enum class DegenerateKind { return_only, repetitive, copy_prompt };

std::string_view to_string(DegenerateKind kind);
DegenerateKind parse_degenerate_kind(std::string_view s);
inline constexpr DegenerateKind kDegenerateKinds[] = {
    DegenerateKind::return_only, DegenerateKind::repetitive, DegenerateKind::copy_prompt};

/// Constructed degenerate body for a function-completion task. Throws
/// PreconditionError for tagged tasks.
Candidate make_degenerate(DegenerateKind kind, const TaskInstance& task, int index);

}  // namespace crr
