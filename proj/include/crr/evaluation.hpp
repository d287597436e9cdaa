#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crr/degeneracy.hpp"
#include "crr/rerankers.hpp"
#include "crr/types.hpp"

namespace crr {

struct EvalConfig {
  int pool_size = 125;
  int subsample_size = 25;
  int bootstrap_trials = 50;
  std::uint64_t seed = 0;
  std::vector<double> alpha_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  bool exec_filter = false;
  bool apply_rejection = true;
  std::size_t workers = 0;  // 0 = hardware concurrency

  /// Throws ValidationError.
  void validate() const;
};

/// Per-candidate payoff of a selection. Defaults to the hidden-test verdict.
using Utility = std::function<double(const Candidate&)>;
double correctness_utility(const Candidate& candidate);

struct Selection {
  Ranking ranking;
  bool filter_fallback = false;     // executability filter kept nothing
  bool rejection_fallback = false;  // every candidate was rejected
};

/// Rejection, then optional executability filtering, then ranking.
/// When every candidate is rejected the lowest index is selected.
Selection select_from_pool(const RankerSpec& spec, std::span<const Candidate> pool,
                           bool exec_filter, bool apply_rejection = true);

struct BootstrapResult {
  double mean = 0.0;
  double std_error = 0.0;  // sample std-dev over trials / sqrt(trials)
  int fallback_tasks = 0;  // tasks that hit a filter fallback in any trial
};

/// Each trial draws `subsample_size` candidates per task without
/// replacement, selects one, and averages its utility over tasks.
BootstrapResult bootstrap_accuracy(const RankerSpec& spec,
                                   std::span<const std::vector<Candidate>> pools,
                                   const EvalConfig& config, const Utility& utility = {});

/// A candidate pool with injected degenerate constructs; `probes` maps each
/// kind to the candidate index of its construct.
struct ProbePool {
  std::vector<Candidate> candidates;
  std::map<DegenerateKind, int> probes;
};

/// Mean over tasks of 1 / rank of each construct. No rejection is applied.
std::map<DegenerateKind, double> degenerate_mrr(const RankerSpec& spec,
                                                std::span<const ProbePool> pools);

struct CurvePoint {
  int size = 0;
  BootstrapResult result;
};

std::vector<CurvePoint> accuracy_vs_samples(const RankerSpec& spec,
                                            std::span<const std::vector<Candidate>> pools,
                                            std::span<const int> sizes, const EvalConfig& config,
                                            const Utility& utility = {});

struct AlphaPoint {
  double alpha = 0.0;
  BootstrapResult result;
};

/// Bootstraps weighted_mmi at every alpha of the grid.
std::vector<AlphaPoint> alpha_sweep(std::span<const std::vector<Candidate>> pools,
                                    const EvalConfig& config, const Utility& utility = {});

/// BLEU-4 over UTF-8 code points: clipped n-gram precisions for n = 1..4,
/// geometric mean, brevity penalty. Zero when any precision is zero.
double char_bleu4(std::string_view hypothesis, std::string_view reference);

struct EvalReport {
  struct MethodRow {
    std::string label;
    BootstrapResult result;
  };
  struct MrrRow {
    std::string label;
    std::map<DegenerateKind, double> mrr;
  };
  struct CurveRow {
    std::string label;
    std::vector<CurvePoint> points;
  };

  EvalConfig config;
  std::vector<MethodRow> bootstrap;
  std::vector<MrrRow> mrr;
  std::vector<CurveRow> sample_curve;
  std::vector<AlphaPoint> alpha_sweep;

  nlohmann::json to_json() const;
  /// Flat rows: section,method,alpha,size,metric,value
  std::string to_csv() const;
  /// Writes report.json and report.csv into `dir`.
  void write(const std::filesystem::path& dir) const;
};

}  // namespace crr
