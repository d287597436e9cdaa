#include "crr/rerankers.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "crr/errors.hpp"
#include "crr/rng.hpp"

namespace crr {

namespace {

constexpr std::pair<Method, std::string_view> kMethods[] = {
    {Method::random, "random"},
    {Method::coder, "coder"},
    {Method::n_coder, "n-coder"},
    {Method::reviewer, "reviewer"},
    {Method::n_reviewer, "n-reviewer"},
    {Method::coder_reviewer, "coder-reviewer"},
    {Method::n_coder_reviewer, "n-coder-reviewer"},
    {Method::weighted_mmi, "weighted-mmi"},
    {Method::alternate, "alternate"},
    {Method::n_alternate, "n-alternate"},
    {Method::mbr_exec, "mbr-exec"},
};

const ChannelScore& need(const std::optional<ScoreBundle>& scores,
                         std::optional<ChannelScore> ScoreBundle::*channel, const char* name,
                         const Candidate& c) {
  if (!scores || !((*scores).*channel)) {
    throw PreconditionError("candidate " + std::to_string(c.index) + " of task '" + c.task_id +
                            "' has no " + name + " score");
  }
  const ChannelScore& s = *((*scores).*channel);
  if (s.len < 1) throw PreconditionError(std::string(name) + " score has zero length");
  return s;
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [value, name] : kMethods) {
    if (value == m) return name;
  }
  return "?";
}

Method parse_method(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (const auto& [value, name] : kMethods) {
    if (name == norm) return value;
  }
  throw UsageError("unknown method '" + std::string(s) + "'");
}

std::vector<Method> default_methods() {
  return {Method::random,         Method::reviewer,         Method::coder,   Method::coder_reviewer,
          Method::n_coder,        Method::n_coder_reviewer, Method::mbr_exec};
}

bool needs_prior(Method m) { return m == Method::alternate || m == Method::n_alternate; }
bool needs_execution(Method m) { return m == Method::mbr_exec; }
bool uses_alpha(Method m) {
  return m == Method::weighted_mmi || m == Method::alternate || m == Method::n_alternate;
}

void RankerSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

std::string RankerSpec::label() const {
  std::string out(to_string(method));
  if (uses_alpha(method)) {
    std::ostringstream a;
    a << alpha;
    out += "@" + a.str();
  }
  return out;
}

double score(const RankerSpec& spec, const Candidate& c) {
  using SB = ScoreBundle;
  auto coder = [&] { return need(c.scores, &SB::coder, "coder", c); };
  auto reviewer = [&] { return need(c.scores, &SB::reviewer, "reviewer", c); };
  auto prior = [&] { return need(c.scores, &SB::prior, "prior", c); };
  auto mean = [](const ChannelScore& s) { return s.logp / s.len; };
  const double a = spec.alpha;
  switch (spec.method) {
    case Method::coder: return coder().logp;
    case Method::n_coder: return mean(coder());
    case Method::reviewer: return reviewer().logp;
    case Method::n_reviewer: return mean(reviewer());
    case Method::coder_reviewer: return coder().logp + reviewer().logp;
    case Method::n_coder_reviewer: return mean(coder()) + mean(reviewer());
    case Method::weighted_mmi: return (1.0 - a) * coder().logp + a * reviewer().logp;
    case Method::alternate: return coder().logp - a * prior().logp;
    case Method::n_alternate: return mean(coder()) - a * mean(prior());
    case Method::random:
    case Method::mbr_exec: break;
  }
  throw PreconditionError("method '" + std::string(to_string(spec.method)) +
                          "' has no per-candidate objective");
}

namespace {

std::vector<const Candidate*> eligible(std::span<const Candidate> pool) {
  std::vector<const Candidate*> out;
  for (const auto& c : pool) {
    if (!c.rejection) out.push_back(&c);
  }
  if (out.empty()) throw PreconditionError("empty effective pool");
  std::sort(out.begin(), out.end(), [](const Candidate* a, const Candidate* b) { return a->index < b->index; });
  return out;
}

Ranking order_by(std::vector<const Candidate*> cands, std::vector<double> values) {
  std::vector<std::size_t> perm(cands.size());
  std::iota(perm.begin(), perm.end(), 0);
  // Candidates are sorted by index, so a stable sort breaks ties by index.
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  Ranking r;
  for (auto p : perm) {
    r.order.push_back(cands[p]->index);
    r.scores.push_back(values[p]);
  }
  r.selected = r.order.front();
  return r;
}

// Splits into alternating non-numeric and numeric pieces.
struct Piece {
  bool numeric;
  std::string_view text;
  double value;
};

std::vector<Piece> split_numbers(std::string_view s) {
  std::vector<Piece> out;
  std::size_t i = 0, lit = 0;
  auto flush_literal = [&](std::size_t upto) {
    if (upto > lit) out.push_back({false, s.substr(lit, upto - lit), 0.0});
  };
  while (i < s.size()) {
    bool starts_number = std::isdigit(static_cast<unsigned char>(s[i])) ||
                         ((s[i] == '-' || s[i] == '.') && i + 1 < s.size() &&
                          (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.'));
    bool inside_word = i > 0 && (std::isalnum(static_cast<unsigned char>(s[i - 1])) || s[i - 1] == '_');
    if (starts_number && !inside_word) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (ec == std::errc() && ptr != s.data() + i) {
        flush_literal(i);
        std::size_t end = static_cast<std::size_t>(ptr - s.data());
        out.push_back({true, s.substr(i, end - i), v});
        i = lit = end;
        continue;
      }
    }
    ++i;
  }
  flush_literal(s.size());
  return out;
}

}  // namespace

bool outputs_equivalent(std::string_view a, std::string_view b, double rel_tol) {
  if (a == b) return true;
  auto pa = split_numbers(a), pb = split_numbers(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].numeric != pb[i].numeric) return false;
    if (!pa[i].numeric) {
      if (pa[i].text != pb[i].text) return false;
      continue;
    }
    double x = pa[i].value, y = pb[i].value;
    if (x == y) continue;
    if (!(std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y)))) return false;
  }
  return true;
}

Ranking mbr_exec_select(std::span<const Candidate> pool) {
  auto cands = eligible(pool);
  for (const auto* c : cands) {
    if (!c->execution) {
      throw PreconditionError("candidate " + std::to_string(c->index) + " has no execution outcome");
    }
  }
  auto ok = [](const Candidate* c) { return c->execution->status == ExecStatus::ok && c->execution->output; };
  std::vector<double> agreement(cands.size(), 0.0);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    agreement[i] = 1.0;
    if (!ok(cands[i])) continue;
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (j != i && ok(cands[j]) && outputs_equivalent(*cands[i]->execution->output, *cands[j]->execution->output)) {
        agreement[i] += 1.0;
      }
    }
  }
  return order_by(std::move(cands), std::move(agreement));
}

Ranking rank(const RankerSpec& spec, std::span<const Candidate> pool) {
  if (spec.method == Method::mbr_exec) return mbr_exec_select(pool);
  auto cands = eligible(pool);
  if (spec.method == Method::random) {
    std::mt19937_64 rng(mix_seed({spec.seed, 0x72616e646f6dULL}));
    for (std::size_t i = cands.size(); i > 1; --i) {
      std::swap(cands[i - 1], cands[uniform_below(rng, i)]);
    }
    Ranking r;
    for (const auto* c : cands) {
      r.order.push_back(c->index);
      r.scores.push_back(0.0);
    }
    r.selected = r.order.front();
    return r;
  }
  std::vector<double> values;
  values.reserve(cands.size());
  for (const auto* c : cands) values.push_back(score(spec, *c));
  return order_by(std::move(cands), std::move(values));
}

}  // namespace crr
