#include "crr/executor.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "crr/corpus.hpp"
#include "crr/errors.hpp"
#include "crr/parallel.hpp"

extern char** environ;

namespace crr {

using nlohmann::json;

json RunnerRequest::to_json() const {
  return {{"context", context}, {"body", body}, {"test", test}, {"timeout_ms", timeout_ms}};
}

ExecutionOutcome parse_runner_output(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("runner output is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("runner output is not an object");
  try {
    return outcome_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("runner output: ") + e.what());
  }
}

namespace {

ExecutionOutcome failure(std::string detail, std::int64_t ms = 0) {
  return {ExecStatus::sandbox_failure, std::nullopt, ms, std::move(detail)};
}

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_, O_CLOEXEC) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() { close_fd(fds_[0]); }
  void close_write() { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  int fds_[2] = {-1, -1};
};

}  // namespace

SubprocessExecutor::SubprocessExecutor(std::vector<std::string> command, int grace_ms)
    : command_(std::move(command)), grace_ms_(grace_ms) {
  if (command_.empty()) throw UsageError("empty runner command");
}

ExecutionOutcome SubprocessExecutor::run(const RunnerRequest& request) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - started).count();
  };

  Pipe in, out;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.read_end(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.write_end(), STDOUT_FILENO);
  std::vector<char*> argv;
  for (auto& a : command_) argv.push_back(a.data());
  argv.push_back(nullptr);
  // Own process group, so a timeout kills the runner's children too.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  pid_t pid = 0;
  int rc = posix_spawnp(&pid, argv[0], &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) return failure(std::string("cannot spawn runner: ") + std::strerror(rc));
  in.close_read();
  out.close_write();

  const std::string payload = request.to_json().dump() + "\n";
  std::signal(SIGPIPE, SIG_IGN);
  std::size_t written = 0;
  while (written < payload.size()) {
    ssize_t n = ::write(in.write_end(), payload.data() + written, payload.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;  // runner closed stdin early; its stdout decides
    written += static_cast<std::size_t>(n);
  }
  in.close_write();

  const std::int64_t deadline = request.timeout_ms + grace_ms_;
  std::string stdout_text;
  bool killed = false;
  char buf[4096];
  while (true) {
    std::int64_t left = deadline - elapsed_ms();
    if (left <= 0) {
      ::kill(-pid, SIGKILL);
      killed = true;
      break;
    }
    pollfd pfd{out.read_end(), POLLIN, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(left));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) continue;
    ssize_t n = ::read(out.read_end(), buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    stdout_text.append(buf, static_cast<std::size_t>(n));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  const auto ms = elapsed_ms();
  if (killed) {
    return {ExecStatus::timeout, std::nullopt, ms, "killed after " + std::to_string(deadline) + " ms"};
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    return failure("runner exited abnormally (status " + std::to_string(status) + ")", ms);
  }
  while (!stdout_text.empty() && (stdout_text.back() == '\n' || stdout_text.back() == '\r')) {
    stdout_text.pop_back();
  }
  if (stdout_text.empty() || stdout_text.find('\n') != std::string::npos) {
    return failure("runner must print exactly one JSON line", ms);
  }
  try {
    return parse_runner_output(stdout_text);
  } catch (const ValidationError& e) {
    return failure(e.what(), ms);
  }
}

ExecutionOutcome SubprocessExecutor::execute(const Candidate& candidate, const TaskInstance& task,
                                             int timeout_ms) {
  if (!task.visible_test) {
    throw PreconditionError("task '" + task.task_id + "' has no visible test");
  }
  return run({task.context, candidate.raw_text, *task.visible_test, timeout_ms});
}

bool SubprocessExecutor::passes_hidden_tests(const Candidate& candidate, const TaskInstance& task,
                                             int timeout_ms) {
  if (task.hidden_tests.empty()) return false;
  for (const auto& test : task.hidden_tests) {
    if (run({task.context, candidate.raw_text, test, timeout_ms}).status != ExecStatus::ok) return false;
  }
  return true;
}

MockExecutor MockExecutor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open executor fixture " + path.string());
  MockExecutor ex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Entry e{outcome_from_json(j.at("outcome")), std::nullopt};
      if (j.contains("correct") && !j["correct"].is_null()) e.correct = j["correct"].get<bool>();
      const std::string task_id = j.at("task_id").get<std::string>();
      if (j.contains("index")) ex.script_index(task_id, j["index"].get<int>(), e);
      else ex.script_text(task_id, j.at("text").get<std::string>(), e);
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return ex;
}

void MockExecutor::script_index(const std::string& task_id, int index, Entry entry) {
  by_index_[{task_id, index}] = std::move(entry);
}

void MockExecutor::script_text(const std::string& task_id, const std::string& raw_text, Entry entry) {
  by_text_[{task_id, raw_text}] = std::move(entry);
}

const MockExecutor::Entry* MockExecutor::find(const Candidate& c) const {
  if (auto it = by_index_.find({c.task_id, c.index}); it != by_index_.end()) return &it->second;
  if (auto it = by_text_.find({c.task_id, c.raw_text}); it != by_text_.end()) return &it->second;
  return nullptr;
}

ExecutionOutcome MockExecutor::execute(const Candidate& candidate, const TaskInstance& task, int) {
  if (!task.visible_test) {
    throw PreconditionError("task '" + task.task_id + "' has no visible test");
  }
  if (const Entry* e = find(candidate)) return e->outcome;
  return failure("no scripted outcome");
}

bool MockExecutor::passes_hidden_tests(const Candidate& candidate, const TaskInstance&, int) {
  const Entry* e = find(candidate);
  return e && e->correct.value_or(false);
}

FilterResult executability_filter(std::span<const Candidate> pool) {
  FilterResult r;
  for (const auto& c : pool) {
    if (c.execution && c.execution->status == ExecStatus::ok) r.kept.push_back(c);
  }
  if (r.kept.empty() && !pool.empty()) {
    r.kept.assign(pool.begin(), pool.end());
    r.fallback = true;
  }
  return r;
}

void execute_pool(Executor& executor, std::span<Candidate> pool, const TaskInstance& task,
                  int timeout_ms, std::size_t workers) {
  parallel_for(pool.size(), workers, [&](std::size_t i) {
    if (!pool[i].rejection) pool[i].execution = executor.execute(pool[i], task, timeout_ms);
  });
}

}  // namespace crr
