#include "demo_fixture.hpp"

#include "crr/corpus.hpp"
#include "crr/errors.hpp"

namespace crr::demo {

using nlohmann::json;

namespace {

struct Body {
  std::string text;
  double weight;
  std::string output;  // empty = runtime error
  bool correct;
};

struct Template {
  std::string args;
  std::string instruction;
  std::string test_args;
  std::vector<Body> bodies;
};

std::vector<Template> templates() {
  return {
      {"nums", "Return the sum of n * n for each n in nums.", "[1, 2, 3]",
       {{"    return sum(n * n for n in nums)\n", 0.35, "14", true},
        {"    total = 0\n    for n in nums:\n        total += n * n\n    return total\n", 0.2, "14", true},
        {"    return sum(nums)\n", 0.15, "6", false},
        {"    return nums\n", 0.15, "[1, 2, 3]", false}}},
      {"text", "Return how many ch in text are vowels, that is in 'aeiou'.", "'banana'",
       {{"    return sum(1 for ch in text if ch in 'aeiou')\n", 0.35, "3", true},
        {"    count = 0\n    for ch in text:\n        if ch in 'aeiou':\n            count += 1\n    return count\n",
         0.2, "3", true},
        {"    return len(text)\n", 0.15, "6", false},
        {"    return text\n", 0.15, "'banana'", false}}},
      {"nums", "Return the max value in nums.", "[3, 9, 4]",
       {{"    return max(nums)\n", 0.35, "9", true},
        {"    best = nums[0]\n    for value in nums:\n        if value > best:\n            best = value\n    return best\n",
         0.2, "9", true},
        {"    return nums[0]\n", 0.15, "3", false},
        {"    return nums\n", 0.15, "[3, 9, 4]", false}}},
      {"sentence", "Return the words of sentence.split() in reverse order, joined by ' '.", "'ab cd'",
       {{"    return ' '.join(sentence.split()[::-1])\n", 0.35, "'cd ab'", true},
        {"    words = sentence.split()\n    words.reverse()\n    return ' '.join(words)\n", 0.2, "'cd ab'", true},
        {"    return sentence[::-1]\n", 0.15, "'dc ba'", false},
        {"    return sentence\n", 0.15, "'ab cd'", false}}},
      {"n", "Return True if n % 2 == 0, else False.", "4",
       {{"    return n % 2 == 0\n", 0.35, "True", true},
        {"    if n % 2 == 0:\n        return True\n    return False\n", 0.2, "True", true},
        {"    return n % 2 == 1\n", 0.15, "False", false},
        {"    return n\n", 0.15, "4", false}}},
      {"nums", "Return the mean of nums, sum(nums) over len(nums).", "[1, 2]",
       {{"    return sum(nums) / len(nums)\n", 0.35, "1.5", true},
        {"    total = sum(nums)\n    return total / len(nums)\n", 0.2, "1.5", true},
        {"    return sum(nums) // len(nums)\n", 0.15, "1", false},
        {"    return nums\n", 0.15, "[1, 2]", false}}},
      {"n", "Return the product of each i in range(2, n + 1).", "4",
       {{"    result = 1\n    for i in range(2, n + 1):\n        result *= i\n    return result\n", 0.35, "24", true},
        {"    product = 1\n    for i in range(2, n + 1):\n        product = product * i\n    return product\n", 0.2,
         "24", true},
        {"    return n * (n - 1)\n", 0.15, "12", false},
        {"    return n\n", 0.15, "4", false}}},
      {"text", "Return the len of the words in text.split().", "'a b c'",
       {{"    return len(text.split())\n", 0.35, "3", true},
        {"    words = text.split()\n    return len(words)\n", 0.2, "3", true},
        {"    return text.count(' ')\n", 0.15, "2", false},
        {"    return text\n", 0.15, "'a b c'", false}}},
      {"word", "Return word[0] in upper case, via upper().", "'cat'",
       {{"    return word[0].upper()\n", 0.35, "'C'", true},
        {"    first = word[0]\n    return first.upper()\n", 0.2, "'C'", true},
        {"    return word[0]\n", 0.15, "'c'", false},
        {"    return word\n", 0.15, "'cat'", false}}},
      {"nums", "Return the min value in nums.", "[3, 1, 2]",
       {{"    return min(nums)\n", 0.35, "1", true},
        {"    return sorted(nums)[0]\n", 0.2, "1", true},
        {"    return sorted(nums)[-1]\n", 0.15, "3", false},
        {"    return nums\n", 0.15, "[3, 1, 2]", false}}},
  };
}

json outcome_line(const std::string& task_id, const std::string& text, const Body& b) {
  json outcome = b.output.empty()
                     ? json{{"status", "runtime_error"}, {"output", nullptr}, {"duration_ms", 3}, {"detail", "NameError"}}
                     : json{{"status", "ok"}, {"output", b.output}, {"duration_ms", 3}, {"detail", nullptr}};
  return {{"task_id", task_id}, {"text", text}, {"outcome", outcome}, {"correct", b.correct}};
}

}  // namespace

std::string erroring_body() { return "    return sum(n)\n"; }

DemoFixture make_demo_fixture(int n_tasks) {
  if (n_tasks < 1) throw PreconditionError("fixture needs at least one task");
  const auto base = templates();
  DemoFixture f;
  f.script.name = "demo";
  f.script.unseen_logprob = -4.0;
  f.script.jitter = 0.3;
  f.script.rules.push_back({"", "write the docstring", "# ", "", -1.5});
  for (int k = 0; k < n_tasks; ++k) {
    const Template& tpl = base[static_cast<std::size_t>(k) % base.size()];
    const std::string name = "fn_" + std::to_string(k);

    TaskInstance t;
    t.task_id = "demo/" + std::to_string(k);
    t.instruction = tpl.instruction;
    t.context = "def " + name + "(" + tpl.args + "):\n";
    t.language = Language::python_function;
    t.prompt_style = PromptStyle::function_completion;
    t.visible_test = name + "(" + tpl.test_args + ")";
    t.hidden_tests = {"assert " + name + "(" + tpl.test_args + ") == " + tpl.bodies.front().output};
    f.tasks.push_back(t);

    std::vector<Body> bodies = tpl.bodies;
    if (k == 0) bodies.back() = {erroring_body(), 0.15, "", false};
    bodies.push_back({"    pass\n", 0.05, "None", false});

    MockProgramSet set{"def " + name + "(", {}};
    for (const auto& b : bodies) {
      set.programs.push_back({b.text, b.weight});
      f.executions.push_back(outcome_line(t.task_id, b.text, b));
    }
    f.script.program_sets.push_back(std::move(set));
  }
  return f;
}

MockExecutor DemoFixture::executor() const {
  MockExecutor ex;
  for (const auto& line : executions) {
    MockExecutor::Entry e{outcome_from_json(line.at("outcome")), line.at("correct").get<bool>()};
    ex.script_text(line.at("task_id").get<std::string>(), line.at("text").get<std::string>(), e);
  }
  return ex;
}

void DemoFixture::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_corpus(tasks, dir / "corpus.jsonl");
  write_file_atomic(dir / "mock_script.json", script.to_json().dump(2) + "\n");
  std::string lines;
  for (const auto& l : executions) lines += l.dump() + "\n";
  write_file_atomic(dir / "executions.jsonl", lines);
  json config = {{"corpus", (dir / "corpus.jsonl").string()},
                 {"backend", (dir / "mock_script.json").string()},
                 {"mock", (dir / "executions.jsonl").string()}};
  write_file_atomic(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace crr::demo
