#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crr/corpus.hpp"
#include "crr/errors.hpp"
#include "crr/pipeline.hpp"
#include "demo_fixture.hpp"
#include "support.hpp"

using namespace crr;
using testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig small_config(const std::filesystem::path& run_dir, const std::filesystem::path& corpus) {
  RunConfig c;
  c.corpus = corpus;
  c.run_dir = run_dir;
  c.n_samples = 20;
  c.subsample = 5;
  c.trials = 10;
  c.curve_sizes = {1, 5, 20};
  c.probe_samples = 10;
  c.workers = 2;
  return c;
}

struct Fixture {
  TempDir dir;
  demo::DemoFixture demo = demo::make_demo_fixture(3);
  Fixture() { demo.write(dir.path()); }
  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
};

}  // namespace

TEST_CASE("sampling writes full pools deterministically") {
  Fixture f;
  MockBackend lm(f.demo.script);
  Pipeline a(small_config(f.dir / "a", f.corpus()), &lm, nullptr);
  auto stats = a.sample();
  CHECK(stats.tasks == 3);
  CHECK(stats.skipped == 0);
  for (const auto& t : f.demo.tasks) CHECK(a.load_task_pool(t).size() == 20);
  CHECK(std::filesystem::exists(f.dir / "a" / "manifest.json"));

  MockBackend lm2(f.demo.script);
  Pipeline b(small_config(f.dir / "b", f.corpus()), &lm2, nullptr);
  b.sample();
  for (const auto& t : f.demo.tasks) CHECK(slurp(a.pool_path(t.task_id)) == slurp(b.pool_path(t.task_id)));
}

TEST_CASE("sampling resumes where it stopped") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto cfg = small_config(f.dir / "run", f.corpus());
  cfg.sample_batch = 20;
  {
    Pipeline p(cfg, &lm, nullptr);
    p.sample();
  }
  const std::size_t calls = lm.sample_calls();
  CHECK(calls == 3);
  Pipeline p(cfg, &lm, nullptr);
  std::filesystem::remove(p.pool_path(f.demo.tasks[1].task_id));
  std::filesystem::remove_all(f.dir / "run" / "cache");
  auto stats = p.sample();
  CHECK(stats.skipped == 2);
  CHECK(lm.sample_calls() == calls + 1);
}

TEST_CASE("a run directory refuses different sampling parameters") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto cfg = small_config(f.dir / "run", f.corpus());
  Pipeline(cfg, &lm, nullptr).sample();
  cfg.temperature = 0.8;
  CHECK_THROWS_AS(Pipeline(cfg, &lm, nullptr).sample(), PreconditionError);
}

TEST_CASE("scoring covers every channel and skips reviewer calls for rejected candidates") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto cfg = small_config(f.dir / "run", f.corpus());
  cfg.probes = false;
  Pipeline p(cfg, &lm, nullptr);
  p.sample();
  p.score();
  // Identical requests are served from the cache, so count distinct ones.
  std::set<std::string> requests;
  std::size_t rejected = 0;
  for (const auto& t : f.demo.tasks) {
    for (const auto& c : p.load_task_pool(t)) {
      REQUIRE(c.scores.has_value());
      CHECK(c.scores->coder.has_value());
      requests.insert(t.task_id + "\x1f" "coder\x1f" + c.raw_text);
      if (c.rejection) {
        ++rejected;
        CHECK_FALSE(c.scores->reviewer.has_value());
      } else {
        CHECK(c.scores->reviewer.has_value());
        requests.insert(t.task_id + "\x1f" "reviewer\x1f" + c.canonical_text);
      }
      CHECK_FALSE(c.scores->prior.has_value());
    }
  }
  CHECK(rejected > 0);
  CHECK(lm.score_calls() == requests.size());

  const std::size_t before = lm.score_calls();
  const std::string pool = slurp(p.pool_path(f.demo.tasks[0].task_id));
  p.score();
  CHECK(lm.score_calls() == before);
  CHECK(slurp(p.pool_path(f.demo.tasks[0].task_id)) == pool);
}

TEST_CASE("prior scores appear when a method needs them") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto cfg = small_config(f.dir / "run", f.corpus());
  cfg.methods = {"alternate"};
  cfg.probes = false;
  Pipeline p(cfg, &lm, nullptr);
  p.sample();
  p.score();
  for (const auto& c : p.load_task_pool(f.demo.tasks[0])) CHECK(c.scores->prior.has_value());
}

TEST_CASE("seven methods give seven selections per task") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto ex = f.demo.executor();
  Pipeline p(small_config(f.dir / "run", f.corpus()), &lm, &ex);
  p.sample();
  p.score();
  p.execute();
  auto sel = p.rerank();
  CHECK(sel.size() == 3 * 7);
  std::map<std::string, int> per_task;
  for (const auto& s : sel) ++per_task[s.task_id];
  for (const auto& [task, n] : per_task) CHECK(n == 7);
  CHECK(std::filesystem::exists(f.dir / "run" / "selections.jsonl"));
}

TEST_CASE("the executability filter only changes tasks with erroring candidates") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto ex = f.demo.executor();
  auto cfg = small_config(f.dir / "run", f.corpus());
  cfg.n_samples = 40;
  Pipeline p(cfg, &lm, &ex);
  p.sample();
  p.score();
  p.execute();
  std::set<std::string> erroring;
  for (const auto& t : f.demo.tasks) {
    for (const auto& c : p.load_task_pool(t)) {
      if (c.execution && c.execution->status != ExecStatus::ok) erroring.insert(t.task_id);
    }
  }
  CHECK(erroring == std::set<std::string>{"demo/0"});
  auto plain = p.rerank();
  cfg.exec_filter = true;
  Pipeline filtered(cfg, &lm, &ex);
  auto with_filter = filtered.rerank();
  REQUIRE(plain.size() == with_filter.size());
  bool changed = false;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    if (plain[i].selected != with_filter[i].selected) {
      CHECK(erroring.count(plain[i].task_id) == 1);
      changed = true;
    }
  }
  CHECK(changed);
}

TEST_CASE("evaluation writes every report section reproducibly") {
  Fixture f;
  MockBackend lm(f.demo.script);
  auto ex = f.demo.executor();
  auto cfg = small_config(f.dir / "run", f.corpus());
  Pipeline p(cfg, &lm, &ex);
  auto report = p.run();
  auto j = nlohmann::json::parse(slurp(f.dir / "run" / "report.json"));
  for (const char* key : {"bootstrap", "mrr", "sample_curve", "alpha_sweep"}) {
    CHECK(j.contains(key));
    CHECK_FALSE(j[key].empty());
  }
  CHECK(j["alpha_sweep"].size() == 9);
  CHECK(j["bootstrap"].size() == 7);
  CHECK(j["mrr"].size() == 6);
  CHECK(std::filesystem::exists(f.dir / "run" / "report.csv"));
  const std::string first = slurp(f.dir / "run" / "report.json");

  // The run directory alone regenerates the report.
  RunConfig only_dir = cfg;
  only_dir.corpus.clear();
  Pipeline again(only_dir);
  again.evaluate();
  CHECK(slurp(f.dir / "run" / "report.json") == first);
}

TEST_CASE("evaluation needs verdicts") {
  Fixture f;
  MockBackend lm(f.demo.script);
  Pipeline p(small_config(f.dir / "run", f.corpus()), &lm, nullptr);
  p.sample();
  p.score();
  CHECK_THROWS_AS(p.evaluate(), PreconditionError);
  CHECK_THROWS_AS(Pipeline(small_config(f.dir / "other", f.corpus())).rerank(), PreconditionError);
}

TEST_CASE("bleu metric reads the first hidden test as reference") {
  TempDir dir;
  auto task = testing::tagged_task(2);
  task.hidden_tests = {"ls -a"};
  std::vector<TaskInstance> tasks{task};
  save_corpus(tasks, dir / "corpus.jsonl");
  MockScript script;
  script.program_sets.push_back({"<text>list all files</text>", {{"ls -a", 1.0}, {"ls", 1.0}, {"cat f", 1.0}}});
  MockBackend lm(script);
  auto cfg = small_config(dir / "run", dir / "corpus.jsonl");
  cfg.metric = "bleu";
  cfg.methods = {"coder-reviewer", "random"};
  Pipeline p(cfg, &lm, nullptr);
  auto report = p.run();
  CHECK(report.mrr.empty());
  for (const auto& row : report.bootstrap) {
    CHECK(row.result.mean >= 0.0);
    CHECK(row.result.mean <= 1.0);
  }
}

TEST_CASE("unknown methods are usage errors") {
  RunConfig c;
  c.methods = {"coder", "oracle"};
  CHECK_THROWS_AS(Pipeline{c}, UsageError);
}

TEST_CASE("config files mirror the flags") {
  RunConfig c;
  c.methods = {"coder", "weighted-mmi"};
  c.alpha = 0.3;
  c.seed = 99;
  c.runner = {"python3", "runner.py"};
  auto back = RunConfig::from_json(c.to_json(), RunConfig{});
  CHECK(back.to_json() == c.to_json());
  auto partial = RunConfig::from_json({{"trials", 7}, {"method", "reviewer"}}, RunConfig{});
  CHECK(partial.trials == 7);
  CHECK(partial.methods == std::vector<std::string>{"reviewer"});
  CHECK(partial.n_samples == 125);
  CHECK_THROWS_AS(RunConfig::from_json({{"trails", 7}}, RunConfig{}), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json({{"trials", "many"}}, RunConfig{}), ValidationError);
}

TEST_CASE("task file stems are safe and distinct") {
  CHECK(task_file_stem("HumanEval/12") != task_file_stem("HumanEval_12"));
  CHECK(task_file_stem("a/../b").find('/') == std::string::npos);
}
