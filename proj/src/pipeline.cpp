#include "crr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "crr/corpus.hpp"
#include "crr/errors.hpp"
#include "crr/http_backend.hpp"
#include "crr/mock_backend.hpp"
#include "crr/parallel.hpp"
#include "crr/rng.hpp"
#include "crr/scoring.hpp"

namespace crr {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
  if (sample_batch < 1) throw ValidationError("sample_batch must be >= 1");
  if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
  if (subsample < 1 || subsample > n_samples) {
    throw ValidationError("subsample must lie in [1, n_samples]");
  }
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (probe_samples < 1) throw ValidationError("probe_samples must be >= 1");
  if (timeout_ms < 1) throw ValidationError("timeout_ms must be >= 1");
  if (metric != "correct" && metric != "bleu") {
    throw ValidationError("metric must be 'correct' or 'bleu', got '" + metric + "'");
  }
  rejection.validate();
  for (const auto& spec : rankers()) spec.validate();
  eval_config().validate();
}

std::vector<RankerSpec> RunConfig::rankers() const {
  std::vector<Method> ms;
  if (methods.empty()) {
    ms = default_methods();
  } else {
    for (const auto& m : methods) ms.push_back(parse_method(m));
  }
  std::vector<RankerSpec> out;
  for (Method m : ms) {
    RankerSpec spec{m, alpha, seed};
    bool dup = std::any_of(out.begin(), out.end(), [&](const RankerSpec& s) { return s.method == m; });
    if (!dup) out.push_back(spec);
  }
  return out;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.pool_size = n_samples;
  e.subsample_size = subsample;
  e.bootstrap_trials = trials;
  e.seed = seed;
  e.alpha_grid = alpha_grid;
  e.exec_filter = exec_filter;
  e.workers = workers;
  return e;
}

json RunConfig::to_json() const {
  return {{"corpus", corpus.string()},
          {"backend", backend},
          {"model", model},
          {"mock", mock.string()},
          {"runner", runner},
          {"method", methods},
          {"alpha", alpha},
          {"exec_filter", exec_filter},
          {"n_samples", n_samples},
          {"sample_batch", sample_batch},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"compress_ratio_threshold", rejection.compress_ratio_threshold},
          {"trivial_patterns", rejection.trivial_patterns_enabled},
          {"subsample", subsample},
          {"trials", trials},
          {"seed", seed},
          {"alpha_grid", alpha_grid},
          {"curve_sizes", curve_sizes},
          {"probes", probes},
          {"probe_samples", probe_samples},
          {"metric", metric},
          {"run_dir", run_dir.string()},
          {"timeout_ms", timeout_ms},
          {"workers", workers}};
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus") c.corpus = v.get<std::string>();
      else if (key == "backend") c.backend = v.get<std::string>();
      else if (key == "model") c.model = v.get<std::string>();
      else if (key == "mock") c.mock = v.get<std::string>();
      else if (key == "runner") c.runner = v.is_string() ? std::vector<std::string>{v.get<std::string>()} : v.get<std::vector<std::string>>();
      else if (key == "method") c.methods = v.is_string() ? std::vector<std::string>{v.get<std::string>()} : v.get<std::vector<std::string>>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "exec_filter") c.exec_filter = v.get<bool>();
      else if (key == "n_samples") c.n_samples = v.get<int>();
      else if (key == "sample_batch") c.sample_batch = v.get<int>();
      else if (key == "temperature") c.temperature = v.get<double>();
      else if (key == "max_tokens") c.max_tokens = v.get<int>();
      else if (key == "compress_ratio_threshold") c.rejection.compress_ratio_threshold = v.get<double>();
      else if (key == "trivial_patterns") c.rejection.trivial_patterns_enabled = v.get<bool>();
      else if (key == "subsample") c.subsample = v.get<int>();
      else if (key == "trials") c.trials = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "alpha_grid") c.alpha_grid = v.get<std::vector<double>>();
      else if (key == "curve_sizes") c.curve_sizes = v.get<std::vector<int>>();
      else if (key == "probes") c.probes = v.get<bool>();
      else if (key == "probe_samples") c.probe_samples = v.get<int>();
      else if (key == "metric") c.metric = v.get<std::string>();
      else if (key == "run_dir") c.run_dir = v.get<std::string>();
      else if (key == "timeout_ms") c.timeout_ms = v.get<int>();
      else if (key == "workers") c.workers = v.get<std::size_t>();
      else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, std::move(base));
}

json SelectionRecord::to_json() const {
  return {{"task_id", task_id},
          {"method", method},
          {"selected", selected},
          {"score", score},
          {"filter_fallback", filter_fallback},
          {"rejection_fallback", rejection_fallback}};
}

std::string task_file_stem(const std::string& task_id) {
  std::string stem;
  for (char ch : task_id) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
    stem += keep ? ch : '_';
  }
  if (stem.size() > 48) stem.resize(48);
  std::ostringstream os;
  os << stem << '-' << std::hex << (fnv1a(task_id) & 0xffffffffULL);
  return os.str();
}

Pipeline::Pipeline(RunConfig config) : Pipeline(std::move(config), nullptr, nullptr) {}

Pipeline::Pipeline(RunConfig config, CompletionBackend* backend, Executor* executor)
    : config_(std::move(config)), backend_(backend), executor_(executor) {
  config_.validate();
}

Pipeline::~Pipeline() = default;

CompletionBackend& Pipeline::backend() {
  if (!cached_) {
    if (!backend_) {
      const std::string& b = config_.backend;
      if (b.rfind("http://", 0) == 0 || b.rfind("https://", 0) == 0) {
        owned_backend_ = std::make_unique<HttpBackend>(HttpBackendConfig::from_env(b, config_.model));
      } else if (!b.empty()) {
        owned_backend_ = std::make_unique<MockBackend>(MockScript::load(b));
      } else {
        throw PreconditionError("no backend configured (--backend)");
      }
      backend_ = owned_backend_.get();
    }
    cached_ = std::make_unique<CachedBackend>(*backend_, config_.run_dir / "cache");
  }
  return *cached_;
}

Executor& Pipeline::executor() {
  if (!executor_) {
    if (!config_.mock.empty()) {
      owned_executor_ = std::make_unique<MockExecutor>(MockExecutor::load(config_.mock));
    } else if (!config_.runner.empty()) {
      owned_executor_ = std::make_unique<SubprocessExecutor>(config_.runner);
    } else {
      throw PreconditionError("execution needs --mock or --runner");
    }
    executor_ = owned_executor_.get();
  }
  return *executor_;
}

fs::path Pipeline::pool_path(const std::string& task_id) const {
  return config_.run_dir / "pools" / (task_file_stem(task_id) + ".jsonl");
}

fs::path Pipeline::probe_path(const std::string& task_id) const {
  return config_.run_dir / "probes" / (task_file_stem(task_id) + ".json");
}

std::vector<TaskInstance> Pipeline::tasks() const {
  const fs::path copy = config_.run_dir / "corpus.jsonl";
  if (fs::exists(copy)) return load_corpus(copy);
  if (config_.corpus.empty()) throw PreconditionError("no corpus configured (--corpus)");
  return load_corpus(config_.corpus);
}

std::vector<Candidate> Pipeline::load_task_pool(const TaskInstance& task) const {
  const fs::path p = pool_path(task.task_id);
  if (!fs::exists(p)) throw PreconditionError("missing pool for task '" + task.task_id + "'; run sample first");
  auto pool = load_pool(p);
  for (const auto& c : pool) {
    if (c.task_id != task.task_id) throw ValidationError("pool file " + p.string() + " holds a foreign task id");
  }
  return pool;
}

void Pipeline::record_config() const {
  fs::create_directories(config_.run_dir);
  write_file_atomic(config_.run_dir / "config.json", config_.to_json().dump(2) + "\n");
}

json Pipeline::sampling_manifest(const std::vector<TaskInstance>& tasks) {
  std::string corpus_text;
  for (const auto& t : tasks) corpus_text += crr::to_json(t).dump() + "\n";
  return {{"backend", backend().identity()},
          {"seed", config_.seed},
          {"temperature", config_.temperature},
          {"max_tokens", config_.max_tokens},
          {"n_samples", config_.n_samples},
          {"sample_batch", config_.sample_batch},
          {"corpus_sha256", digest({corpus_text})},
          {"tasks", tasks.size()}};
}

StageStats Pipeline::sample() {
  if (config_.corpus.empty() && !fs::exists(config_.run_dir / "corpus.jsonl")) {
    throw PreconditionError("no corpus configured (--corpus)");
  }
  const auto tasks = config_.corpus.empty() ? this->tasks() : load_corpus(config_.corpus);
  fs::create_directories(config_.run_dir / "pools");
  const json manifest = sampling_manifest(tasks);
  const fs::path manifest_path = config_.run_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json old;
    try {
      old = json::parse(in);
    } catch (const json::exception&) {
      throw ValidationError("unreadable manifest " + manifest_path.string());
    }
    if (old != manifest) {
      throw PreconditionError("run directory " + config_.run_dir.string() +
                              " was sampled with different parameters, backend or corpus");
    }
  } else {
    save_corpus(tasks, config_.run_dir / "corpus.jsonl");
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  }
  record_config();

  CompletionBackend& lm = backend();
  StageStats stats;
  stats.tasks = static_cast<int>(tasks.size());
  std::atomic<int> skipped{0};
  const std::size_t workers = config_.workers ? config_.workers : default_workers();
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const TaskInstance& task = tasks[t];
    const fs::path path = pool_path(task.task_id);
    if (fs::exists(path)) {
      try {
        if (load_pool(path).size() == static_cast<std::size_t>(config_.n_samples)) {
          ++skipped;
          return;
        }
      } catch (const Error&) {
        // Partial or corrupt: resample (cached responses make this cheap).
      }
    }
    const PromptPackage prompt = build_coder_prompt(task);
    std::vector<Candidate> pool;
    for (int batch = 0; static_cast<int>(pool.size()) < config_.n_samples; ++batch) {
      SampleRequest req;
      req.prompt = prompt.text;
      req.temperature = config_.temperature;
      req.max_tokens = config_.max_tokens;
      req.n = std::min(config_.sample_batch, config_.n_samples - static_cast<int>(pool.size()));
      req.stop_sequences = prompt.stop_sequences;
      req.seed = mix_seed({config_.seed, fnv1a(task.task_id), static_cast<std::uint64_t>(batch)});
      for (auto& s : lm.sample(req)) {
        Candidate c;
        c.task_id = task.task_id;
        c.index = static_cast<int>(pool.size());
        c.raw_text = s.text;
        c.canonical_text = s.text;
        pool.push_back(std::move(c));
      }
    }
    save_pool(pool, path);
  });
  stats.skipped = skipped.load();
  return stats;
}

StageStats Pipeline::score() {
  const auto tasks = this->tasks();
  record_config();
  CompletionBackend& lm = backend();
  const auto specs = config_.rankers();
  ScoringOptions options;
  options.workers = config_.workers;
  options.score_prior = std::any_of(specs.begin(), specs.end(), [](const RankerSpec& s) { return needs_prior(s.method); });
  StageStats stats;
  for (const auto& task : tasks) {
    auto pool = load_task_pool(task);
    for (auto& c : pool) apply_rejection(c, task, config_.rejection);
    score_pool(lm, task, pool, options);
    save_pool(pool, pool_path(task.task_id));
    ++stats.tasks;

    if (config_.probes && task.prompt_style == PromptStyle::function_completion) {
      std::vector<Candidate> head = pool;
      std::sort(head.begin(), head.end(), [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
      head.resize(std::min<std::size_t>(head.size(), static_cast<std::size_t>(config_.probe_samples)));
      ProbePool probe = build_probe_pool(lm, task, head, options);
      json probes = json::object();
      for (const auto& [kind, index] : probe.probes) probes[std::string(to_string(kind))] = index;
      json cands = json::array();
      for (const auto& c : probe.candidates) cands.push_back(crr::to_json(c));
      fs::create_directories(probe_path(task.task_id).parent_path());
      write_file_atomic(probe_path(task.task_id),
                        json{{"task_id", task.task_id}, {"probes", probes}, {"candidates", cands}}.dump() + "\n");
    }
  }
  return stats;
}

StageStats Pipeline::execute() {
  const auto tasks = this->tasks();
  record_config();
  Executor& exec = executor();
  const std::size_t workers = config_.workers ? config_.workers : default_workers();
  StageStats stats;
  for (const auto& task : tasks) {
    auto pool = load_task_pool(task);
    const bool done = std::all_of(pool.begin(), pool.end(), [&](const Candidate& c) {
      return c.correct.has_value() && (c.execution.has_value() || c.rejection || !task.visible_test);
    });
    ++stats.tasks;
    if (done) {
      ++stats.skipped;
      continue;
    }
    if (task.visible_test) {
      std::vector<Candidate> todo;
      for (const auto& c : pool) {
        if (!c.rejection && !c.execution) todo.push_back(c);
      }
      execute_pool(exec, todo, task, config_.timeout_ms, workers);
      std::map<int, ExecutionOutcome> outcomes;
      for (const auto& c : todo) outcomes[c.index] = *c.execution;
      for (auto& c : pool) {
        if (auto it = outcomes.find(c.index); it != outcomes.end()) c.execution = it->second;
      }
    }
    parallel_for(pool.size(), workers, [&](std::size_t i) {
      if (!pool[i].correct) pool[i].correct = exec.passes_hidden_tests(pool[i], task, config_.timeout_ms);
    });
    save_pool(pool, pool_path(task.task_id));
  }
  return stats;
}

std::vector<SelectionRecord> Pipeline::rerank() {
  const auto tasks = this->tasks();
  record_config();
  const auto specs = config_.rankers();
  std::vector<SelectionRecord> out;
  std::string lines;
  for (const auto& task : tasks) {
    const auto pool = load_task_pool(task);
    for (RankerSpec spec : specs) {
      spec.seed = mix_seed({config_.seed, fnv1a(task.task_id)});
      Selection sel = select_from_pool(spec, pool, config_.exec_filter);
      SelectionRecord r{task.task_id, spec.label(), sel.ranking.selected, sel.ranking.scores.front(),
                        sel.filter_fallback, sel.rejection_fallback};
      lines += r.to_json().dump() + "\n";
      out.push_back(std::move(r));
    }
  }
  write_file_atomic(config_.run_dir / "selections.jsonl", lines);
  return out;
}

EvalReport Pipeline::evaluate() {
  const auto tasks = this->tasks();
  record_config();
  std::vector<std::vector<Candidate>> pools;
  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& task : tasks) {
    pools.push_back(load_task_pool(task));
    by_id[task.task_id] = &task;
  }
  if (pools.empty()) throw PreconditionError("corpus has no tasks");

  Utility utility;
  if (config_.metric == "bleu") {
    for (const auto& t : tasks) {
      if (t.hidden_tests.empty()) throw PreconditionError("task '" + t.task_id + "' has no reference for bleu");
    }
    utility = [&](const Candidate& c) { return char_bleu4(c.raw_text, by_id.at(c.task_id)->hidden_tests.front()); };
  } else {
    for (const auto& pool : pools) {
      for (const auto& c : pool) correctness_utility(c);
    }
  }

  EvalReport report;
  report.config = config_.eval_config();
  const auto specs = config_.rankers();
  for (const auto& spec : specs) {
    report.bootstrap.push_back({spec.label(), bootstrap_accuracy(spec, pools, report.config, utility)});
  }

  std::vector<ProbePool> probes;
  for (const auto& task : tasks) {
    const fs::path p = probe_path(task.task_id);
    if (!fs::exists(p)) continue;
    std::ifstream in(p);
    try {
      json j = json::parse(in);
      ProbePool pp;
      for (const auto& c : j.at("candidates")) pp.candidates.push_back(candidate_from_json(c));
      for (const auto& [kind, index] : j.at("probes").items()) pp.probes[parse_degenerate_kind(kind)] = index.get<int>();
      probes.push_back(std::move(pp));
    } catch (const json::exception& e) {
      throw ValidationError("probe file " + p.string() + ": " + e.what());
    }
  }
  if (!probes.empty()) {
    for (const auto& spec : specs) {
      if (needs_execution(spec.method)) continue;  // constructs are never executed
      report.mrr.push_back({spec.label(), degenerate_mrr(spec, probes)});
    }
  }

  std::size_t smallest = pools.front().size();
  for (const auto& p : pools) smallest = std::min(smallest, p.size());
  std::vector<int> sizes;
  for (int s : config_.curve_sizes) {
    if (s >= 1 && static_cast<std::size_t>(s) <= smallest) sizes.push_back(s);
  }
  for (const auto& spec : specs) {
    report.sample_curve.push_back({spec.label(), accuracy_vs_samples(spec, pools, sizes, report.config, utility)});
  }
  report.alpha_sweep = alpha_sweep(pools, report.config, utility);
  report.write(config_.run_dir);
  return report;
}

EvalReport Pipeline::run() {
  sample();
  score();
  if (!config_.mock.empty() || !config_.runner.empty() || executor_) execute();
  rerank();
  return evaluate();
}

}  // namespace crr
