#include <doctest.h>

#include <cmath>
#include <random>

#include "crr/errors.hpp"
#include "crr/evaluation.hpp"
#include "support.hpp"

using namespace crr;
using testing::scored;

namespace {

std::vector<Candidate> pool_with(const std::vector<bool>& correct, const std::vector<double>& coder) {
  std::vector<Candidate> pool;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    Candidate c = scored(static_cast<int>(i), coder[i], -1.0);
    c.correct = correct[i];
    pool.push_back(c);
  }
  return pool;
}

// Expected top-1 correctness over every k-subset, by enumeration.
double enumerate_expectation(const std::vector<Candidate>& pool, std::size_t k, const RankerSpec& spec) {
  const std::size_t n = pool.size();
  double hits = 0;
  int subsets = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<Candidate> sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(pool[i]);
    }
    int sel = rank(spec, sub).selected;
    hits += pool[static_cast<std::size_t>(sel)].correct.value() ? 1 : 0;
    ++subsets;
  }
  return hits / subsets;
}

ProbePool probe_pool(const std::vector<double>& coder, std::map<DegenerateKind, int> probes) {
  ProbePool p;
  for (std::size_t i = 0; i < coder.size(); ++i) p.candidates.push_back(scored(static_cast<int>(i), coder[i], -1));
  p.probes = std::move(probes);
  return p;
}

}  // namespace

TEST_CASE("all-correct pools score one with zero error") {
  std::vector<std::vector<Candidate>> pools{pool_with({true, true, true}, {-1, -2, -3})};
  EvalConfig cfg;
  cfg.subsample_size = 2;
  cfg.bootstrap_trials = 20;
  auto r = bootstrap_accuracy({Method::coder}, pools, cfg);
  CHECK(r.mean == 1.0);
  CHECK(r.std_error == 0.0);
}

TEST_CASE("bootstrap matches the enumerated expectation") {
  auto pool = pool_with({true, false, false, false}, {-1, -5, -6, -7});
  const double expected = enumerate_expectation(pool, 2, {Method::coder});
  CHECK(expected == 0.5);
  std::vector<std::vector<Candidate>> pools{pool};
  EvalConfig cfg;
  cfg.subsample_size = 2;
  cfg.bootstrap_trials = 10000;
  cfg.seed = 11;
  auto r = bootstrap_accuracy({Method::coder}, pools, cfg);
  CHECK(std::abs(r.mean - expected) < 0.02);
}

TEST_CASE("standard error is the sample deviation over root trials") {
  // One task, subsample of one: each trial scores 0 or 1, so the sample
  // deviation follows from the mean alone.
  std::vector<std::vector<Candidate>> pools{pool_with({true, false}, {-1, -2})};
  EvalConfig cfg;
  cfg.subsample_size = 1;
  cfg.bootstrap_trials = 400;
  auto r = bootstrap_accuracy({Method::coder}, pools, cfg);
  const double t = cfg.bootstrap_trials;
  CHECK(r.std_error == doctest::Approx(std::sqrt(r.mean * (1 - r.mean) * t / (t - 1)) / std::sqrt(t)).epsilon(1e-12));
  CHECK(r.mean > 0.4);
  CHECK(r.mean < 0.6);
}

TEST_CASE("random selection converges to the correct fraction") {
  std::vector<std::vector<Candidate>> pools;
  std::mt19937_64 rng(3);
  int correct = 0, total = 0;
  for (int t = 0; t < 5; ++t) {
    std::vector<bool> flags;
    for (int i = 0; i < 20; ++i) {
      flags.push_back(rng() % 3 == 0);
      correct += flags.back();
      ++total;
    }
    pools.push_back(pool_with(flags, std::vector<double>(20, -1.0)));
  }
  EvalConfig cfg;
  cfg.subsample_size = 5;
  cfg.bootstrap_trials = 2000;
  auto r = bootstrap_accuracy({Method::random, 0.5, 1}, pools, cfg);
  CHECK(std::abs(r.mean - static_cast<double>(correct) / total) < 3 * r.std_error + 1e-12);
}

TEST_CASE("bootstrap is deterministic under a fixed seed") {
  std::vector<std::vector<Candidate>> pools{pool_with({true, false, true, false, false}, {-3, -1, -2, -4, -5})};
  EvalConfig cfg;
  cfg.subsample_size = 3;
  cfg.seed = 5;
  cfg.workers = 3;
  auto a = bootstrap_accuracy({Method::random, 0.5, 2}, pools, cfg);
  cfg.workers = 1;
  auto b = bootstrap_accuracy({Method::random, 0.5, 2}, pools, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("bootstrap preconditions") {
  std::vector<std::vector<Candidate>> pools{pool_with({true, false}, {-1, -2})};
  EvalConfig cfg;
  cfg.subsample_size = 3;
  CHECK_THROWS_AS(bootstrap_accuracy({Method::coder}, pools, cfg), PreconditionError);
  cfg.subsample_size = 1;
  pools[0][1].correct.reset();
  CHECK_THROWS_AS(bootstrap_accuracy({Method::coder}, pools, cfg), PreconditionError);
  EvalConfig bad;
  bad.subsample_size = 200;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("selection falls back when everything is rejected or erroring") {
  auto pool = pool_with({false, true, false}, {-1, -2, -3});
  for (auto& c : pool) c.rejection = Rejection::trivial;
  auto s = select_from_pool({Method::coder_reviewer}, pool, false);
  CHECK(s.rejection_fallback);
  CHECK(s.ranking.selected == 0);

  pool = pool_with({false, true, false}, {-1, -2, -3});
  for (auto& c : pool) c.execution = testing::failed();
  s = select_from_pool({Method::coder}, pool, true);
  CHECK(s.filter_fallback);
  CHECK(s.ranking.selected == 0);
  pool[1].execution = testing::ok("3");
  s = select_from_pool({Method::coder}, pool, true);
  CHECK_FALSE(s.filter_fallback);
  CHECK(s.ranking.selected == 1);
}

TEST_CASE("fallback tasks are counted once") {
  auto pool = pool_with({false, true, false, true}, {-1, -2, -3, -4});
  for (auto& c : pool) c.execution = testing::failed();
  auto clean = pool_with({false, true}, {-1, -2});
  for (auto& c : clean) c.execution = testing::ok("1");
  std::vector<std::vector<Candidate>> pools{pool, clean};
  EvalConfig cfg;
  cfg.subsample_size = 2;
  cfg.exec_filter = true;
  auto r = bootstrap_accuracy({Method::coder}, pools, cfg);
  CHECK(r.fallback_tasks == 1);
}

TEST_CASE("mrr examples") {
  std::map<DegenerateKind, int> probes{{DegenerateKind::return_only, 0},
                                       {DegenerateKind::repetitive, 1},
                                       {DegenerateKind::copy_prompt, 2}};
  std::vector<ProbePool> first{probe_pool({-1, -2, -3, -4}, probes)};
  auto m = degenerate_mrr({Method::coder}, first);
  CHECK(m[DegenerateKind::return_only] == 1.0);
  CHECK(m[DegenerateKind::repetitive] == 0.5);

  std::map<DegenerateKind, int> at3{{DegenerateKind::return_only, 3},
                                    {DegenerateKind::repetitive, 1},
                                    {DegenerateKind::copy_prompt, 2}};
  std::vector<ProbePool> two{probe_pool({-1, -2, -3, -4}, at3), probe_pool({-1, -4, -3, -2}, at3)};
  CHECK(degenerate_mrr({Method::coder}, two)[DegenerateKind::return_only] == 0.375);

  std::vector<ProbePool> missing{probe_pool({-1, -2}, {{DegenerateKind::return_only, 0}})};
  CHECK_THROWS_AS(degenerate_mrr({Method::coder}, missing), PreconditionError);
}

TEST_CASE("mrr ignores rejection flags and agrees with a naive re-sort") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lp(-30, -1);
  std::vector<ProbePool> pools;
  double naive = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> coder;
    for (int i = 0; i < 28; ++i) coder.push_back(lp(rng));
    auto p = probe_pool(coder, {{DegenerateKind::return_only, 25},
                                {DegenerateKind::repetitive, 26},
                                {DegenerateKind::copy_prompt, 27}});
    p.candidates[26].rejection = Rejection::repetitive;
    int better = 0;
    for (double v : coder) better += v > coder[26];
    naive += 1.0 / (better + 1);
    pools.push_back(p);
  }
  auto m = degenerate_mrr({Method::coder}, pools);
  CHECK(m[DegenerateKind::repetitive] == doctest::Approx(naive / 20).epsilon(1e-12));
}

TEST_CASE("mrr is invariant to permuting the other candidates") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lp(-30, -1);
  std::vector<double> coder;
  for (int i = 0; i < 28; ++i) coder.push_back(lp(rng));
  std::map<DegenerateKind, int> probes{{DegenerateKind::return_only, 25},
                                       {DegenerateKind::repetitive, 26},
                                       {DegenerateKind::copy_prompt, 27}};
  std::vector<ProbePool> base{probe_pool(coder, probes)};
  auto expected = degenerate_mrr({Method::coder}, base);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(coder.begin(), coder.begin() + 25, rng);
    std::vector<ProbePool> perm{probe_pool(coder, probes)};
    CHECK(degenerate_mrr({Method::coder}, perm) == expected);
  }
}

TEST_CASE("sample curve and alpha sweep shapes") {
  std::vector<std::vector<Candidate>> pools{pool_with({true, false, true, false, true, false}, {-1, -2, -3, -4, -5, -6})};
  EvalConfig cfg;
  cfg.bootstrap_trials = 200;
  std::vector<int> sizes{1, 2, 4, 6};
  auto curve = accuracy_vs_samples({Method::random, 0.5, 4}, pools, sizes, cfg);
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].size == 1);
  CHECK(std::abs(curve[0].result.mean - 0.5) < 3 * curve[0].result.std_error);
  CHECK(accuracy_vs_samples({Method::coder}, pools, sizes, cfg).back().result.mean == 1.0);
  cfg.subsample_size = 3;
  auto sweep = alpha_sweep(pools, cfg);
  CHECK(sweep.size() == 9);
  CHECK(sweep.front().alpha == 0.1);
  CHECK(sweep.back().alpha == 0.9);
}

TEST_CASE("char bleu") {
  CHECK(char_bleu4("ls -la /tmp", "ls -la /tmp") == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(char_bleu4("abcd", "wxyz") == 0.0);
  CHECK(char_bleu4("abcdab", "cdabxx") > 0.0);
  CHECK(char_bleu4("", "abc") == 0.0);
  CHECK(char_bleu4("abc", "abc") == 0.0);  // no 4-grams
  // Brute-force n-gram counting reference values.
  CHECK(char_bleu4("abcdef", "abcdxf") == doctest::Approx(0.537284965911771).epsilon(1e-12));
  CHECK(char_bleu4("abcd", "abcdef") == doctest::Approx(0.6065306597126334).epsilon(1e-12));
  CHECK(char_bleu4("h\xc3\xa9llo w\xc3\xb6rld", "hello w\xc3\xb6rld") == doctest::Approx(0.8070557274927982).epsilon(1e-12));
}

TEST_CASE("report sections") {
  EvalReport r;
  r.bootstrap.push_back({"coder", {0.5, 0.1, 2}});
  r.mrr.push_back({"coder", {{DegenerateKind::return_only, 1.0}, {DegenerateKind::repetitive, 0.5},
                             {DegenerateKind::copy_prompt, 0.25}}});
  r.sample_curve.push_back({"coder", {{5, {0.4, 0.0, 0}}}});
  r.alpha_sweep.push_back({0.5, {0.3, 0.01, 0}});
  auto j = r.to_json();
  for (const char* key : {"config", "bootstrap", "mrr", "sample_curve", "alpha_sweep"}) CHECK(j.contains(key));
  CHECK(j["mrr"][0]["CopyPrompt"] == 0.25);
  auto csv = r.to_csv();
  CHECK(csv.starts_with("section,method,alpha,size,metric,value\n"));
  CHECK(csv.find("bootstrap,coder,,,fallback_tasks,2\n") != std::string::npos);
  CHECK(csv.find("sample_curve,coder,,5,mean,0.4\n") != std::string::npos);
  CHECK(csv.find("alpha_sweep,weighted-mmi,0.5,,mean,0.3\n") != std::string::npos);
}
