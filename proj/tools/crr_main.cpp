#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crr/errors.hpp"
#include "crr/pipeline.hpp"
#include "demo_fixture.hpp"

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void print_report(const crr::EvalReport& report) {
  std::printf("%-22s %8s %8s %9s\n", "method", "mean", "stderr", "fallback");
  for (const auto& row : report.bootstrap) {
    std::printf("%-22s %8.4f %8.4f %9d\n", row.label.c_str(), row.result.mean, row.result.std_error,
                row.result.fallback_tasks);
  }
  if (!report.mrr.empty()) {
    std::printf("\n%-22s %10s %10s %10s\n", "mrr", "ReturnOnly", "Repetitive", "CopyPrompt");
    for (const auto& row : report.mrr) {
      std::printf("%-22s %10.4f %10.4f %10.4f\n", row.label.c_str(), row.mrr.at(crr::DegenerateKind::return_only),
                  row.mrr.at(crr::DegenerateKind::repetitive), row.mrr.at(crr::DegenerateKind::copy_prompt));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coder-Reviewer reranking for sampled programs"};
  app.require_subcommand(1);

  std::string config_path, corpus, backend, model, mock, runner, run_dir, metric;
  std::vector<std::string> methods;
  double alpha = 0, temperature = 0;
  int n_samples = 0, subsample = 0, trials = 0, timeout_ms = 0, max_tokens = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  bool exec_filter = false, no_probes = false;

  app.add_option("--config", config_path, "JSON config whose keys mirror the flags; flags override");
  auto* o_corpus = app.add_option("--corpus", corpus, "Task corpus (one JSON object per line)");
  auto* o_backend = app.add_option("--backend", backend, "Completions endpoint URL or mock script path");
  auto* o_model = app.add_option("--model", model, "Model name sent to the endpoint");
  auto* o_mock = app.add_option("--mock", mock, "Scripted execution outcomes (mock executor)");
  auto* o_runner = app.add_option("--runner", runner, "Sandbox runner command, e.g. 'python3 runner.py'");
  auto* o_method = app.add_option("--method", methods, "Ranking method; repeatable or comma separated")->delimiter(',');
  auto* o_alpha = app.add_option("--alpha", alpha, "Mixing weight for weighted-mmi and alternate (default 0.5)");
  auto* o_filter = app.add_flag("--exec-filter", exec_filter, "Drop candidates that fail the visible test");
  auto* o_n = app.add_option("--n-samples", n_samples, "Samples per task (default 125)");
  auto* o_sub = app.add_option("--subsample", subsample, "Bootstrap subsample size (default 25)");
  auto* o_trials = app.add_option("--trials", trials, "Bootstrap trials (default 50)");
  auto* o_seed = app.add_option("--seed", seed, "Seed for sampling and bootstrap (default 0)");
  auto* o_run = app.add_option("--run-dir", run_dir, "Run directory (default ./run)");
  auto* o_timeout = app.add_option("--timeout-ms", timeout_ms, "Execution timeout (default 10000)");
  auto* o_temp = app.add_option("--temperature", temperature, "Sampling temperature (default 0.4)");
  auto* o_max = app.add_option("--max-tokens", max_tokens, "Sampling token limit (default 300)");
  auto* o_metric = app.add_option("--metric", metric, "correct | bleu")->check(CLI::IsMember({"correct", "bleu"}));
  auto* o_probes = app.add_flag("--no-probes", no_probes, "Skip scoring of degenerate-construct pools");
  auto* o_workers = app.add_option("--workers", workers, "Worker threads (default: hardware concurrency)");

  auto* c_sample = app.add_subcommand("sample", "Sample candidate pools");
  auto* c_score = app.add_subcommand("score", "Canonicalize, reject and score pools");
  auto* c_execute = app.add_subcommand("execute", "Run visible and hidden tests");
  auto* c_rerank = app.add_subcommand("rerank", "Select one candidate per task and method");
  auto* c_evaluate = app.add_subcommand("evaluate", "Bootstrap, MRR, sample curve and alpha sweep reports");
  auto* c_run = app.add_subcommand("run", "All stages in order");
  auto* c_fixture = app.add_subcommand("make-fixture", "Write the scripted demo corpus");
  std::string fixture_dir = "demo";
  int fixture_tasks = 10;
  c_fixture->add_option("--out", fixture_dir, "Output directory");
  c_fixture->add_option("--tasks", fixture_tasks, "Number of tasks");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_fixture->parsed()) {
      crr::demo::make_demo_fixture(fixture_tasks).write(fixture_dir);
      std::printf("wrote %s\n", fixture_dir.c_str());
      return 0;
    }

    crr::RunConfig cfg;
    if (!config_path.empty()) cfg = crr::RunConfig::load(config_path, cfg);
    if (*o_corpus) cfg.corpus = corpus;
    if (*o_backend) cfg.backend = backend;
    if (*o_model) cfg.model = model;
    if (*o_mock) cfg.mock = mock;
    if (*o_runner) cfg.runner = split_words(runner);
    if (*o_method) cfg.methods = methods;
    if (*o_alpha) cfg.alpha = alpha;
    if (*o_filter) cfg.exec_filter = exec_filter;
    if (*o_n) cfg.n_samples = n_samples;
    if (*o_sub) cfg.subsample = subsample;
    if (*o_trials) cfg.trials = trials;
    if (*o_seed) cfg.seed = seed;
    if (*o_run) cfg.run_dir = run_dir;
    if (*o_timeout) cfg.timeout_ms = timeout_ms;
    if (*o_temp) cfg.temperature = temperature;
    if (*o_max) cfg.max_tokens = max_tokens;
    if (*o_metric) cfg.metric = metric;
    if (*o_probes) cfg.probes = !no_probes;
    if (*o_workers) cfg.workers = workers;

    crr::Pipeline pipeline(cfg);
    if (c_sample->parsed()) {
      auto s = pipeline.sample();
      std::printf("sampled %d tasks (%d already complete)\n", s.tasks - s.skipped, s.skipped);
    } else if (c_score->parsed()) {
      auto s = pipeline.score();
      std::printf("scored %d tasks (cache hits %zu, misses %zu)\n", s.tasks, pipeline.cache()->hits(),
                  pipeline.cache()->misses());
    } else if (c_execute->parsed()) {
      auto s = pipeline.execute();
      std::printf("executed %d tasks (%d already complete)\n", s.tasks - s.skipped, s.skipped);
    } else if (c_rerank->parsed()) {
      auto sel = pipeline.rerank();
      std::printf("wrote %zu selections\n", sel.size());
    } else if (c_evaluate->parsed()) {
      print_report(pipeline.evaluate());
    } else if (c_run->parsed()) {
      print_report(pipeline.run());
    }
  } catch (const crr::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
