#include "crr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "crr/corpus.hpp"
#include "crr/errors.hpp"
#include "crr/executor.hpp"
#include "crr/parallel.hpp"
#include "crr/rng.hpp"

namespace crr {

using nlohmann::json;

void EvalConfig::validate() const {
  if (subsample_size < 1) throw ValidationError("subsample_size must be >= 1");
  if (subsample_size > pool_size) throw ValidationError("subsample_size must not exceed pool_size");
  if (bootstrap_trials < 1) throw ValidationError("bootstrap_trials must be >= 1");
  for (double a : alpha_grid) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("alpha grid values must lie in (0, 1)");
  }
}

double correctness_utility(const Candidate& c) {
  if (!c.correct) {
    throw PreconditionError("candidate " + std::to_string(c.index) + " of task '" + c.task_id +
                            "' has no correctness verdict");
  }
  return *c.correct ? 1.0 : 0.0;
}

Selection select_from_pool(const RankerSpec& spec, std::span<const Candidate> pool,
                           bool exec_filter, bool apply_rejection) {
  Selection s;
  std::vector<Candidate> eligible;
  for (const auto& c : pool) {
    if (!apply_rejection || !c.rejection) eligible.push_back(c);
  }
  if (eligible.empty() && !pool.empty()) {
    // Rejected candidates lack reviewer scores, so the fallback keeps sample order.
    s.rejection_fallback = true;
    std::vector<int> order;
    for (const auto& c : pool) order.push_back(c.index);
    std::sort(order.begin(), order.end());
    s.ranking.order = order;
    s.ranking.scores.assign(order.size(), 0.0);
    s.ranking.selected = order.front();
    return s;
  }
  for (auto& c : eligible) c.rejection.reset();
  if (exec_filter) {
    FilterResult f = executability_filter(eligible);
    s.filter_fallback = f.fallback;
    eligible = std::move(f.kept);
  }
  s.ranking = rank(spec, eligible);
  return s;
}

namespace {

struct TrialOutcome {
  double accuracy = 0.0;
  std::vector<char> fallback;  // per task
};

BootstrapResult summarize(const std::vector<TrialOutcome>& trials, std::size_t tasks) {
  BootstrapResult r;
  const double n = static_cast<double>(trials.size());
  for (const auto& t : trials) r.mean += t.accuracy;
  r.mean /= n;
  if (trials.size() > 1) {
    double ss = 0.0;
    for (const auto& t : trials) ss += (t.accuracy - r.mean) * (t.accuracy - r.mean);
    r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  for (std::size_t k = 0; k < tasks; ++k) {
    bool any = std::any_of(trials.begin(), trials.end(), [&](const TrialOutcome& t) { return t.fallback[k] != 0; });
    r.fallback_tasks += any ? 1 : 0;
  }
  return r;
}

}  // namespace

BootstrapResult bootstrap_accuracy(const RankerSpec& spec, std::span<const std::vector<Candidate>> pools,
                                   const EvalConfig& config, const Utility& utility) {
  if (config.subsample_size < 1 || config.bootstrap_trials < 1) {
    throw ValidationError("subsample_size and bootstrap_trials must be >= 1");
  }
  if (pools.empty()) throw PreconditionError("no task pools");
  const Utility& value = utility ? utility : Utility(correctness_utility);
  const auto k = static_cast<std::size_t>(config.subsample_size);
  std::vector<std::map<int, double>> values(pools.size());
  for (std::size_t t = 0; t < pools.size(); ++t) {
    if (pools[t].size() < k) {
      throw PreconditionError("pool of task " + std::to_string(t) + " holds " +
                              std::to_string(pools[t].size()) + " candidates, fewer than the subsample size " +
                              std::to_string(k));
    }
    for (const auto& c : pools[t]) values[t][c.index] = value(c);
  }

  std::vector<TrialOutcome> trials(static_cast<std::size_t>(config.bootstrap_trials));
  const std::size_t workers = config.workers ? config.workers : default_workers();
  parallel_for(trials.size(), workers, [&](std::size_t trial) {
    TrialOutcome& out = trials[trial];
    out.fallback.assign(pools.size(), 0);
    double total = 0.0;
    std::vector<Candidate> subset;
    for (std::size_t t = 0; t < pools.size(); ++t) {
      const auto& pool = pools[t];
      std::mt19937_64 rng(mix_seed({config.seed, trial, t}));
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + uniform_below(rng, idx.size() - i)]);
      }
      subset.clear();
      for (std::size_t i = 0; i < k; ++i) subset.push_back(pool[idx[i]]);
      RankerSpec s = spec;
      s.seed = mix_seed({spec.seed, config.seed, trial, t});
      Selection sel = select_from_pool(s, subset, config.exec_filter, config.apply_rejection);
      out.fallback[t] = sel.filter_fallback ? 1 : 0;
      total += values[t].at(sel.ranking.selected);
    }
    out.accuracy = total / static_cast<double>(pools.size());
  });
  return summarize(trials, pools.size());
}

std::map<DegenerateKind, double> degenerate_mrr(const RankerSpec& spec, std::span<const ProbePool> pools) {
  if (pools.empty()) throw PreconditionError("no probe pools");
  std::map<DegenerateKind, double> sums;
  for (const auto& p : pools) {
    std::vector<Candidate> cands = p.candidates;
    for (auto& c : cands) c.rejection.reset();
    Ranking r = rank(spec, cands);
    for (auto kind : kDegenerateKinds) {
      auto it = p.probes.find(kind);
      if (it == p.probes.end()) {
        throw PreconditionError("probe pool lacks the " + std::string(to_string(kind)) + " construct");
      }
      auto pos = std::find(r.order.begin(), r.order.end(), it->second);
      if (pos == r.order.end()) {
        throw PreconditionError("construct index " + std::to_string(it->second) + " missing from pool");
      }
      sums[kind] += 1.0 / static_cast<double>(pos - r.order.begin() + 1);
    }
  }
  for (auto& [kind, v] : sums) v /= static_cast<double>(pools.size());
  return sums;
}

std::vector<CurvePoint> accuracy_vs_samples(const RankerSpec& spec, std::span<const std::vector<Candidate>> pools,
                                            std::span<const int> sizes, const EvalConfig& config,
                                            const Utility& utility) {
  std::vector<CurvePoint> out;
  for (int size : sizes) {
    EvalConfig c = config;
    c.subsample_size = size;
    c.pool_size = std::max(c.pool_size, size);
    out.push_back({size, bootstrap_accuracy(spec, pools, c, utility)});
  }
  return out;
}

std::vector<AlphaPoint> alpha_sweep(std::span<const std::vector<Candidate>> pools, const EvalConfig& config,
                                    const Utility& utility) {
  std::vector<AlphaPoint> out;
  for (double a : config.alpha_grid) {
    RankerSpec spec{Method::weighted_mmi, a, config.seed};
    out.push_back({a, bootstrap_accuracy(spec, pools, config, utility)});
  }
  return out;
}

namespace {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 1;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
    if (i + static_cast<std::size_t>(len) > s.size()) len = 1, cp = c;
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3f);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::map<std::u32string, int> ngram_counts(const std::u32string& s, std::size_t n) {
  std::map<std::u32string, int> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

}  // namespace

double char_bleu4(std::string_view hypothesis, std::string_view reference) {
  const std::u32string hyp = decode_utf8(hypothesis), ref = decode_utf8(reference);
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (hyp.size() < n) return 0.0;
    auto h = ngram_counts(hyp, n), r = ngram_counts(ref, n);
    long matched = 0;
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) matched += std::min(count, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(hyp.size() - n + 1));
  }
  const double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

namespace {

json result_json(const BootstrapResult& r) {
  return {{"mean", r.mean}, {"stderr", r.std_error}, {"fallback_tasks", r.fallback_tasks}};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

json EvalReport::to_json() const {
  json j;
  j["config"] = {{"pool_size", config.pool_size},
                 {"subsample_size", config.subsample_size},
                 {"bootstrap_trials", config.bootstrap_trials},
                 {"seed", config.seed},
                 {"alpha_grid", config.alpha_grid},
                 {"exec_filter", config.exec_filter},
                 {"apply_rejection", config.apply_rejection}};
  j["bootstrap"] = json::array();
  for (const auto& row : bootstrap) {
    json r = result_json(row.result);
    r["method"] = row.label;
    j["bootstrap"].push_back(r);
  }
  j["mrr"] = json::array();
  for (const auto& row : mrr) {
    json r = {{"method", row.label}};
    for (const auto& [kind, v] : row.mrr) r[std::string(to_string(kind))] = v;
    j["mrr"].push_back(r);
  }
  j["sample_curve"] = json::array();
  for (const auto& row : sample_curve) {
    json points = json::array();
    for (const auto& p : row.points) {
      json r = result_json(p.result);
      r["size"] = p.size;
      points.push_back(r);
    }
    j["sample_curve"].push_back({{"method", row.label}, {"points", points}});
  }
  j["alpha_sweep"] = json::array();
  for (const auto& p : alpha_sweep) {
    json r = result_json(p.result);
    r["alpha"] = p.alpha;
    j["alpha_sweep"].push_back(r);
  }
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "section,method,alpha,size,metric,value\n";
  auto row = [&](std::string_view section, std::string_view method, std::string alpha, std::string size,
                 std::string_view metric, double v) {
    os << section << ',' << method << ',' << alpha << ',' << size << ',' << metric << ',' << fmt(v) << '\n';
  };
  for (const auto& r : bootstrap) {
    row("bootstrap", r.label, "", "", "mean", r.result.mean);
    row("bootstrap", r.label, "", "", "stderr", r.result.std_error);
    row("bootstrap", r.label, "", "", "fallback_tasks", r.result.fallback_tasks);
  }
  for (const auto& r : mrr) {
    for (const auto& [kind, v] : r.mrr) row("mrr", r.label, "", "", std::string("mrr_") + std::string(to_string(kind)), v);
  }
  for (const auto& r : sample_curve) {
    for (const auto& p : r.points) {
      row("sample_curve", r.label, "", std::to_string(p.size), "mean", p.result.mean);
      row("sample_curve", r.label, "", std::to_string(p.size), "stderr", p.result.std_error);
    }
  }
  for (const auto& p : alpha_sweep) {
    row("alpha_sweep", "weighted-mmi", fmt(p.alpha), "", "mean", p.result.mean);
    row("alpha_sweep", "weighted-mmi", fmt(p.alpha), "", "stderr", p.result.std_error);
  }
  return os.str();
}

void EvalReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json().dump(2) + "\n");
  write_file_atomic(dir / "report.csv", to_csv());
}

}  // namespace crr
