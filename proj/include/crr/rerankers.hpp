#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crr/types.hpp"

namespace crr {

enum class Method {
  random,
  coder,
  n_coder,
  reviewer,
  n_reviewer,
  coder_reviewer,
  n_coder_reviewer,
  weighted_mmi,
  alternate,
  n_alternate,
  mbr_exec,
};

/// CLI spelling, e.g. "coder-reviewer". Parsing also accepts underscores.
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

/// The selection methods of the main comparison table.
std::vector<Method> default_methods();

bool needs_prior(Method m);
bool needs_execution(Method m);
bool uses_alpha(Method m);

struct RankerSpec {
  Method method = Method::coder_reviewer;
  double alpha = 0.5;  // weighted_mmi and alternate variants only
  std::uint64_t seed = 0;

  /// Throws ValidationError unless alpha lies in (0, 1).
  void validate() const;
  std::string label() const;
};

struct Ranking {
  std::vector<int> order;      // candidate indices, best first
  std::vector<double> scores;  // aligned with `order`
  int selected = -1;
};

/// Objective value of one candidate. Throws PreconditionError when a
/// required score channel is missing; random and mbr_exec have no per
/// candidate objective and are rejected here too.
double score(const RankerSpec& spec, const Candidate& candidate);

/// Total order over the non-rejected candidates of `pool`: descending score,
/// ties by ascending candidate index. `random` is a seeded uniform shuffle
/// and `mbr_exec` delegates to mbr_exec_select. Throws PreconditionError for
/// an empty effective pool.
Ranking rank(const RankerSpec& spec, std::span<const Candidate> pool);

/// Minimum Bayes risk over execution outputs: each candidate scores the
/// number of candidates (itself included) with an equivalent output.
/// Non-ok outcomes agree with nothing but themselves.
Ranking mbr_exec_select(std::span<const Candidate> pool);

/// Exact equality of non-numeric text; numeric tokens equal within
/// relative tolerance.
bool outputs_equivalent(std::string_view a, std::string_view b, double rel_tol = 1e-6);

}  // namespace crr
