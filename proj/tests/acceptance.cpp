// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "crr/corpus.hpp"
#include "crr/degeneracy.hpp"
#include "crr/evaluation.hpp"
#include "crr/mock_backend.hpp"
#include "crr/pipeline.hpp"
#include "crr/rerankers.hpp"
#include "demo_fixture.hpp"
#include "support.hpp"

using namespace crr;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s < budget_s;
  const bool pass = o.pass && in_time;
  failures += pass ? 0 : 1;
  std::printf("%s  %-28s %7.3fs (< %gs)  %s%s\n", pass ? "PASS" : "FAIL", name, s, budget_s, o.detail.c_str(),
              in_time ? "" : "  [over time budget]");
  std::fflush(stdout);
}

// Independent BLEU: code points compared as vectors, n-gram counts by linear
// scans rather than maps.
std::vector<std::u32string> code_points(const std::string& s) {
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t len = 1;
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c >= 0xf0) len = 4;
    else if (c >= 0xe0) len = 3;
    else if (c >= 0xc0) len = 2;
    std::u32string cp;
    for (std::size_t k = 0; k < len; ++k) cp.push_back(static_cast<unsigned char>(s[i + k]));
    out.push_back(cp);
    i += len;
  }
  return out;
}

double oracle_bleu(const std::string& hyp_s, const std::string& ref_s) {
  auto hyp = code_points(hyp_s), ref = code_points(ref_s);
  if (hyp.empty()) return 0.0;
  auto gram_at = [](const std::vector<std::u32string>& v, std::size_t i, std::size_t n) {
    return std::vector<std::u32string>(v.begin() + static_cast<long>(i), v.begin() + static_cast<long>(i + n));
  };
  auto count_in = [&](const std::vector<std::u32string>& v, const std::vector<std::u32string>& g) {
    int c = 0;
    for (std::size_t i = 0; i + g.size() <= v.size(); ++i) c += gram_at(v, i, g.size()) == g;
    return c;
  };
  double prod = 1.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (hyp.size() < n) return 0.0;
    double matched = 0;
    std::vector<std::vector<std::u32string>> done;
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
      auto g = gram_at(hyp, i, n);
      bool seen = false;
      for (const auto& d : done) seen |= d == g;
      if (seen) continue;
      done.push_back(g);
      matched += std::min(count_in(hyp, g), count_in(ref, g));
    }
    if (matched == 0) return 0.0;
    prod *= matched / static_cast<double>(hyp.size() - n + 1);
  }
  const double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  return (c > r ? 1.0 : std::exp(1.0 - r / c)) * std::pow(prod, 0.25);
}

// Risk minimisation over execution outputs: the candidate with the fewest
// disagreeing peers, ties to the lowest index.
int oracle_mbr(const std::vector<int>& cls) {
  int best = -1, best_risk = 1 << 30;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    int risk = 0;
    for (std::size_t j = 0; j < cls.size(); ++j) {
      if (i == j) continue;
      const bool agree = cls[i] >= 0 && cls[i] == cls[j];
      risk += agree ? 0 : 1;
    }
    if (risk < best_risk) best_risk = risk, best = static_cast<int>(i);
  }
  return best;
}

struct DemoRun {
  testing::TempDir dir;
  demo::DemoFixture fixture;
  MockBackend backend;
  MockExecutor executor;
  std::unique_ptr<Pipeline> pipeline;

  explicit DemoRun(RunConfig cfg, int tasks = 10)
      : fixture(demo::make_demo_fixture(tasks)), backend(fixture.script), executor(fixture.executor()) {
    fixture.write(dir.path());
    cfg.corpus = dir / "corpus.jsonl";
    cfg.run_dir = dir / "run";
    pipeline = std::make_unique<Pipeline>(cfg, &backend, &executor);
  }
};

std::string fmt(const char* f, double a, double b, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

}  // namespace

int main() {
  criterion("argmax-invariance", 1.0, [] {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lp(-80.0, -0.1);
    int mismatches = 0;
    const int pools = 1000;
    for (int p = 0; p < pools; ++p) {
      std::vector<Candidate> pool;
      const int n = 2 + static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) pool.push_back(testing::scored(i, lp(rng), lp(rng), 1 + rng() % 30, 1 + rng() % 30));
      if (p % 10 == 0) pool[1].scores = pool[0].scores;  // exact ties
      mismatches += rank({Method::weighted_mmi, 0.5}, pool).selected != rank({Method::coder_reviewer}, pool).selected;
    }
    return Outcome{mismatches == 0, std::to_string(pools) + " pools, " + std::to_string(mismatches) + " mismatches"};
  });

  criterion("mbr-oracle-exhaustive", 10.0, [] {
    long pools = 0, mismatches = 0;
    // Classes 0..2 are outputs; in the second sweep class 2 is an error.
    for (int with_error = 0; with_error < 2; ++with_error) {
      for (int n = 1; n <= 8; ++n) {
        int total = 1;
        for (int k = 0; k < n; ++k) total *= 3;
        for (int code = 0; code < total; ++code) {
          std::vector<int> cls;
          std::vector<Candidate> pool;
          for (int k = 0, c = code; k < n; ++k, c /= 3) {
            const int v = c % 3;
            cls.push_back(with_error && v == 2 ? -1 : v);
            Candidate cand = testing::scored(k, -1, -1);
            cand.execution = cls.back() < 0 ? testing::failed() : testing::ok(std::string(1, static_cast<char>('A' + v)));
            pool.push_back(cand);
          }
          ++pools;
          mismatches += mbr_exec_select(pool).selected != oracle_mbr(cls);
        }
      }
    }
    return Outcome{mismatches == 0, std::to_string(pools) + " pools, " + std::to_string(mismatches) + " mismatches"};
  });

  criterion("degeneracy-mrr", 30.0, [] {
    RunConfig cfg;
    DemoRun run(cfg);
    run.pipeline->sample();
    run.pipeline->score();
    auto report_dir = run.dir / "run";
    std::vector<ProbePool> probes;
    for (const auto& t : run.fixture.tasks) {
      auto j = nlohmann::json::parse(std::ifstream(run.pipeline->probe_path(t.task_id)));
      ProbePool pp;
      for (const auto& c : j["candidates"]) pp.candidates.push_back(candidate_from_json(c));
      for (const auto& [k, v] : j["probes"].items()) pp.probes[parse_degenerate_kind(k)] = v.template get<int>();
      probes.push_back(std::move(pp));
    }
    auto coder = degenerate_mrr({Method::coder}, probes);
    auto reviewer = degenerate_mrr({Method::reviewer}, probes);
    auto cr = degenerate_mrr({Method::coder_reviewer}, probes);
    const auto R = DegenerateKind::return_only, C = DegenerateKind::copy_prompt;
    bool pass = coder[R] > cr[R] && reviewer[C] > cr[C];
    return Outcome{pass, fmt("ReturnOnly coder %.3f > CR %.3f; CopyPrompt reviewer %.3f > CR %.3f", coder[R], cr[R],
                             reviewer[C], cr[C])};
  });

  criterion("rejection-suite", 5.0, [] {
    auto fixture = demo::make_demo_fixture(10);
    auto tasks = fixture.tasks;
    tasks.push_back(testing::function_task());
    int bad = 0;
    double min_ratio = 1e9;
    for (const auto& t : tasks) {
      Candidate rep = make_degenerate(DegenerateKind::repetitive, t, 0);
      min_ratio = std::min(min_ratio, compression_ratio(rep.raw_text));
      bad += !(compression_ratio(rep.raw_text) > 4.0 && apply_rejection(rep, t) == Rejection::repetitive);
      Candidate ret = make_degenerate(DegenerateKind::return_only, t, 1);
      bad += apply_rejection(ret, t) != Rejection::trivial;
      Candidate copy = make_degenerate(DegenerateKind::copy_prompt, t, 2);
      bad += !(apply_rejection(copy, t) == Rejection::empty && copy.canonical_text.empty());
    }
    return Outcome{bad == 0, std::to_string(tasks.size()) + " tasks, min Repetitive ratio " +
                                 fmt("%.3f", min_ratio, 0) + ", " + std::to_string(bad) + " misses"};
  });

  criterion("bootstrap-estimator", 5.0, [] {
    std::vector<Candidate> pool;
    for (int i = 0; i < 4; ++i) {
      Candidate c = testing::scored(i, i == 0 ? -1.0 : -5.0 - i, -1);
      c.correct = i == 0;
      pool.push_back(c);
    }
    // Enumerate all 2-subsets: the correct candidate wins whenever drawn.
    double hits = 0;
    int subsets = 0;
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        std::vector<Candidate> sub{pool[static_cast<std::size_t>(a)], pool[static_cast<std::size_t>(b)]};
        hits += *pool[static_cast<std::size_t>(rank({Method::coder}, sub).selected)].correct;
        ++subsets;
      }
    }
    const double expected = hits / subsets;
    std::vector<std::vector<Candidate>> pools{pool};
    EvalConfig cfg;
    cfg.pool_size = 4;
    cfg.subsample_size = 2;
    cfg.bootstrap_trials = 10000;
    cfg.seed = 7;
    auto r = bootstrap_accuracy({Method::coder}, pools, cfg);
    return Outcome{expected == 0.5 && std::abs(r.mean - expected) < 0.02,
                   fmt("estimate %.4f vs enumerated %.4f (tol 0.02)", r.mean, expected)};
  });

  criterion("sample-count-stability", 60.0, [] {
    RunConfig cfg;
    cfg.probes = false;
    DemoRun run(cfg);
    run.pipeline->sample();
    run.pipeline->score();
    run.pipeline->execute();
    std::vector<std::vector<Candidate>> pools;
    for (const auto& t : run.fixture.tasks) pools.push_back(run.pipeline->load_task_pool(t));
    const std::vector<int> sizes{5, 25};
    auto coder = accuracy_vs_samples({Method::coder}, pools, sizes, cfg.eval_config());
    auto cr = accuracy_vs_samples({Method::coder_reviewer}, pools, sizes, cfg.eval_config());
    const double c5 = coder[0].result.mean, c25 = coder[1].result.mean, cr25 = cr[1].result.mean;
    return Outcome{c25 <= c5 && cr25 >= c25, fmt("coder@25 %.3f <= coder@5 %.3f; CR@25 %.3f >= coder@25", c25, c5, cr25)};
  });

  criterion("char-bleu4-oracle", 5.0, [] {
    std::mt19937_64 rng(77);
    const std::vector<std::string> alphabet{"a", "b", "c", " ", "-", "\xc3\xa9", "\xe2\x86\x92", "\xf0\x9f\x99\x82"};
    double worst = 0;
    int nonzero = 0;
    for (int i = 0; i < 50; ++i) {
      auto draw = [&](int len) {
        std::string s;
        for (int k = 0; k < len; ++k) s += alphabet[rng() % (i % 2 ? 3 : alphabet.size())];
        return s;
      };
      const std::string hyp = draw(static_cast<int>(rng() % 30));
      std::string ref = draw(static_cast<int>(rng() % 30));
      if (i % 3 != 0) {
        // Edit a copy of the hypothesis so most pairs share higher-order n-grams.
        auto cps = code_points(hyp);
        ref.clear();
        for (const auto& cp : cps) {
          std::string ch(cp.begin(), cp.end());
          const auto roll = rng() % 10;
          if (roll == 0) continue;
          ref += roll == 1 ? alphabet[rng() % alphabet.size()] : ch;
          if (roll == 2) ref += alphabet[rng() % alphabet.size()];
        }
      }
      const double got = char_bleu4(hyp, ref), want = oracle_bleu(hyp, ref);
      worst = std::max(worst, std::abs(got - want));
      nonzero += want > 0;
    }
    return Outcome{worst <= 1e-9 && nonzero > 10,
                   fmt("50 pairs (%g non-zero), max |diff| %.2e (tol 1e-9)", nonzero, worst)};
  });

  criterion("full-pipeline-dry-run", 300.0, [] {
    RunConfig cfg;
    cfg.workers = 0;
    DemoRun run(cfg);
    auto report = run.pipeline->run();
    auto j = nlohmann::json::parse(std::ifstream(run.dir / "run" / "report.json"));
    bool sections = true;
    for (const char* key : {"bootstrap", "mrr", "sample_curve", "alpha_sweep"}) sections &= j.contains(key) && !j[key].empty();
    std::size_t candidates = 0;
    for (const auto& t : run.fixture.tasks) candidates += run.pipeline->load_task_pool(t).size();
    const bool shape = candidates == 1250 && report.bootstrap.size() == 7 && j["alpha_sweep"].size() == 9;
    return Outcome{sections && shape, std::to_string(run.fixture.tasks.size()) + " tasks, " + std::to_string(candidates) +
                                          " candidates, " + std::to_string(report.bootstrap.size()) +
                                          " methods, mock executor only"};
  });

  std::printf("%s\n", failures == 0 ? "all criteria passed" : (std::to_string(failures) + " criteria failed").c_str());
  return failures == 0 ? 0 : 1;
}
