#include "crr/corpus.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "crr/errors.hpp"
#include "crr/prompt_builder.hpp"

namespace crr {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N],
             std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::pair<Language, std::string_view> kLanguages[] = {
    {Language::python_function, "python-function"},
    {Language::tagged_generic, "tagged-generic"}};
constexpr std::pair<PromptStyle, std::string_view> kStyles[] = {
    {PromptStyle::function_completion, "function-completion"},
    {PromptStyle::tagged, "tagged"}};
constexpr std::pair<Rejection, std::string_view> kRejections[] = {
    {Rejection::empty, "empty"},
    {Rejection::trivial, "trivial"},
    {Rejection::repetitive, "repetitive"}};
constexpr std::pair<ExecStatus, std::string_view> kStatuses[] = {
    {ExecStatus::ok, "ok"},
    {ExecStatus::runtime_error, "runtime_error"},
    {ExecStatus::timeout, "timeout"},
    {ExecStatus::sandbox_failure, "sandbox_failure"}};

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing required field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<json> read_lines(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!out.back().is_object()) throw ParseError(lineno, "record is not an object");
    out.back()["__line"] = lineno;
  }
  return out;
}

std::size_t line_of(const json& j) { return j.at("__line").get<std::size_t>(); }

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view to_string(Language v) { return enum_name(v, kLanguages); }
std::string_view to_string(PromptStyle v) { return enum_name(v, kStyles); }
std::string_view to_string(Rejection v) { return enum_name(v, kRejections); }
std::string_view to_string(ExecStatus v) { return enum_name(v, kStatuses); }
Language parse_language(std::string_view s) { return parse_enum(s, kLanguages, "language"); }
PromptStyle parse_prompt_style(std::string_view s) { return parse_enum(s, kStyles, "prompt_style"); }
Rejection parse_rejection(std::string_view s) { return parse_enum(s, kRejections, "rejection"); }
ExecStatus parse_exec_status(std::string_view s) { return parse_enum(s, kStatuses, "status"); }

json to_json(const TaskInstance& t) {
  json demos = json::array();
  for (const auto& d : t.demos) {
    demos.push_back({{"context", d.context}, {"instruction", d.instruction}, {"program", d.program}});
  }
  json j = {{"task_id", t.task_id},
            {"instruction", t.instruction},
            {"context", t.context},
            {"demos", demos},
            {"language", to_string(t.language)},
            {"prompt_style", to_string(t.prompt_style)},
            {"visible_test", t.visible_test ? json(*t.visible_test) : json(nullptr)},
            {"hidden_tests", t.hidden_tests}};
  return j;
}

TaskInstance task_from_json(const json& j) {
  TaskInstance t;
  t.task_id = require_string(j, "task_id");
  t.instruction = require_string(j, "instruction");
  t.context = require_string(j, "context");
  for (const auto& d : require(j, "demos")) {
    t.demos.push_back({require_string(d, "context"), require_string(d, "instruction"),
                       require_string(d, "program")});
  }
  t.language = parse_language(require_string(j, "language"));
  t.prompt_style = parse_prompt_style(require_string(j, "prompt_style"));
  t.visible_test = optional_string(j, "visible_test");
  if (auto it = j.find("hidden_tests"); it != j.end() && !it->is_null()) {
    for (const auto& h : *it) {
      if (!h.is_string()) throw ValidationError("hidden_tests entries must be strings");
      t.hidden_tests.push_back(h.get<std::string>());
    }
  }
  return t;
}

json to_json(const ScoreBundle& s) {
  json j = json::object();
  if (s.coder) {
    j["coder_logp"] = s.coder->logp;
    j["coder_len"] = s.coder->len;
  }
  if (s.reviewer) {
    j["reviewer_logp"] = s.reviewer->logp;
    j["reviewer_len"] = s.reviewer->len;
  }
  if (s.prior) {
    j["prior_logp"] = s.prior->logp;
    j["prior_len"] = s.prior->len;
  }
  return j;
}

ScoreBundle scores_from_json(const json& j) {
  auto channel = [&](const char* logp, const char* len) -> std::optional<ChannelScore> {
    bool has_logp = j.contains(logp) && !j[logp].is_null();
    bool has_len = j.contains(len) && !j[len].is_null();
    if (!has_logp && !has_len) return std::nullopt;
    if (has_logp != has_len) {
      throw ValidationError(std::string(logp) + " and " + len + " must be set together");
    }
    return ChannelScore{j[logp].get<double>(), j[len].get<int>()};
  };
  return {channel("coder_logp", "coder_len"), channel("reviewer_logp", "reviewer_len"),
          channel("prior_logp", "prior_len")};
}

json to_json(const ExecutionOutcome& o) {
  return {{"status", to_string(o.status)},
          {"output", o.output ? json(*o.output) : json(nullptr)},
          {"duration_ms", o.duration_ms},
          {"detail", o.detail ? json(*o.detail) : json(nullptr)}};
}

ExecutionOutcome outcome_from_json(const json& j) {
  ExecutionOutcome o;
  o.status = parse_exec_status(require_string(j, "status"));
  o.output = optional_string(j, "output");
  if (auto it = j.find("duration_ms"); it != j.end() && !it->is_null()) {
    o.duration_ms = it->get<std::int64_t>();
  }
  o.detail = optional_string(j, "detail");
  if (o.output.has_value() != (o.status == ExecStatus::ok)) {
    throw ValidationError("execution output must be present iff status is ok");
  }
  return o;
}

json to_json(const Candidate& c) {
  return {{"task_id", c.task_id},
          {"index", c.index},
          {"raw_text", c.raw_text},
          {"canonical_text", c.canonical_text},
          {"rejection", c.rejection ? json(to_string(*c.rejection)) : json(nullptr)},
          {"scores", c.scores ? to_json(*c.scores) : json(nullptr)},
          {"execution", c.execution ? to_json(*c.execution) : json(nullptr)},
          {"correct", c.correct ? json(*c.correct) : json(nullptr)}};
}

Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.task_id = require_string(j, "task_id");
  const json& index = require(j, "index");
  if (!index.is_number_integer()) throw ValidationError("field 'index' must be an integer");
  c.index = index.get<int>();
  c.raw_text = require_string(j, "raw_text");
  c.canonical_text = require_string(j, "canonical_text");
  if (auto r = optional_string(j, "rejection")) c.rejection = parse_rejection(*r);
  if (auto it = j.find("scores"); it != j.end() && !it->is_null()) c.scores = scores_from_json(*it);
  if (auto it = j.find("execution"); it != j.end() && !it->is_null()) {
    c.execution = outcome_from_json(*it);
  }
  if (auto it = j.find("correct"); it != j.end() && !it->is_null()) c.correct = it->get<bool>();
  return c;
}

void validate_task(const TaskInstance& t) {
  if (t.task_id.empty()) throw ValidationError("empty task_id");
  if (t.prompt_style == PromptStyle::function_completion) {
    std::size_t headers = count_function_headers(t.context);
    if (headers != 1) {
      throw ValidationError("task '" + t.task_id + "': function-completion context must hold " +
                            "exactly one function header, found " + std::to_string(headers));
    }
  }
}

void validate_corpus(std::span<const TaskInstance> tasks) {
  std::unordered_set<std::string> seen;
  for (const auto& t : tasks) {
    validate_task(t);
    if (!seen.insert(t.task_id).second) {
      throw ValidationError("duplicate task_id '" + t.task_id + "'");
    }
  }
  if (!tasks.empty()) {
    bool few_shot = !tasks.front().demos.empty();
    for (const auto& t : tasks) {
      if (t.demos.empty() == few_shot) {
        throw ValidationError("task '" + t.task_id +
                              "': corpus mixes zero-shot and few-shot tasks");
      }
    }
  }
}

void validate_pool(std::span<const Candidate> candidates) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& c : candidates) {
    if (c.index < 0) throw ValidationError("negative candidate index");
    if (!seen.emplace(c.task_id, c.index).second) {
      throw ValidationError("duplicate candidate (" + c.task_id + ", " +
                            std::to_string(c.index) + ")");
    }
    if (c.execution && c.execution->output.has_value() != (c.execution->status == ExecStatus::ok)) {
      throw ValidationError("execution output must be present iff status is ok");
    }
  }
}

std::vector<TaskInstance> parse_corpus(std::istream& in) {
  std::vector<TaskInstance> tasks;
  std::unordered_set<std::string> seen;
  for (const auto& j : read_lines(in)) {
    try {
      tasks.push_back(task_from_json(j));
      validate_task(tasks.back());
    } catch (const ValidationError& e) {
      throw ParseError(line_of(j), e.what());
    } catch (const json::exception& e) {
      throw ParseError(line_of(j), e.what());
    }
    if (!seen.insert(tasks.back().task_id).second) {
      throw ParseError(line_of(j), "duplicate task_id '" + tasks.back().task_id + "'");
    }
  }
  validate_corpus(tasks);
  return tasks;
}

std::vector<TaskInstance> load_corpus(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_corpus(in);
}

std::vector<Candidate> parse_pool(std::istream& in) {
  std::vector<Candidate> pool;
  for (const auto& j : read_lines(in)) {
    try {
      pool.push_back(candidate_from_json(j));
    } catch (const ValidationError& e) {
      throw ParseError(line_of(j), e.what());
    } catch (const json::exception& e) {
      throw ParseError(line_of(j), e.what());
    }
  }
  validate_pool(pool);
  return pool;
}

std::vector<Candidate> load_pool(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_pool(in);
}

namespace {

template <typename T>
std::string to_lines(std::span<const T> items) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

void save_corpus(std::span<const TaskInstance> tasks, const std::filesystem::path& path) {
  validate_corpus(tasks);
  write_file_atomic(path, to_lines(tasks));
}

void save_pool(std::span<const Candidate> candidates, const std::filesystem::path& path) {
  validate_pool(candidates);
  write_file_atomic(path, to_lines(candidates));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

}  // namespace crr
