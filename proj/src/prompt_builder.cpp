#include "crr/prompt_builder.hpp"

#include <cctype>

#include "crr/errors.hpp"

namespace crr {

namespace {

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Returns the name if `line` (without newline) opens a def, else empty.
std::string def_name(std::string_view line) {
  std::size_t i = line.find_first_not_of(" \t");
  if (i == std::string_view::npos) return {};
  line.remove_prefix(i);
  if (line.starts_with("async ")) {
    line.remove_prefix(6);
    line.remove_prefix(std::min(line.find_first_not_of(" \t"), line.size()));
  }
  if (!line.starts_with("def ")) return {};
  line.remove_prefix(4);
  line.remove_prefix(std::min(line.find_first_not_of(" \t"), line.size()));
  std::size_t n = 0;
  while (n < line.size() && is_ident_char(line[n])) ++n;
  if (n == 0) return {};
  std::string_view rest = line.substr(n);
  rest.remove_prefix(std::min(rest.find_first_not_of(" \t"), rest.size()));
  if (!rest.starts_with("(")) return {};
  return std::string(line.substr(0, n));
}

template <typename F>
void for_each_line(std::string_view s, F&& f) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t nl = s.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? s.size() : nl + 1;
    if (!f(pos, s.substr(pos, end - pos))) return;
    pos = end;
  }
}

std::string with_newline(std::string s) {
  if (!s.empty() && s.back() != '\n') s += '\n';
  return s;
}

std::string tagged(const std::string& tag, std::string_view content) {
  std::string out = "<" + tag + ">";
  out += content;
  out += "</" + tag + ">";
  return out;
}

void require_function_zero_shot(const TaskInstance& task) {
  if (!task.demos.empty()) {
    throw PreconditionError("task '" + task.task_id +
                            "': function-completion prompts do not support demonstrations");
  }
}

constexpr std::string_view kTripleQuote = "\"\"\"";

}  // namespace

std::vector<std::string> function_completion_stops() {
  return {"\ndef ", "\nclass ", "\nif __name__", "\nprint(", "\nassert "};
}

std::size_t count_function_headers(std::string_view source) {
  std::size_t count = 0;
  for_each_line(source, [&](std::size_t, std::string_view line) {
    if (!def_name(line).empty()) ++count;
    return true;
  });
  return count;
}

FunctionHeader find_function_header(std::string_view source) {
  std::size_t count = count_function_headers(source);
  if (count != 1) {
    throw ValidationError("expected exactly one function header, found " + std::to_string(count));
  }
  FunctionHeader header;
  for_each_line(source, [&](std::size_t offset, std::string_view line) {
    std::string name = def_name(line);
    if (name.empty()) return true;
    header.begin = offset;
    header.name = std::move(name);
    header.indent = std::string(line.substr(0, line.find_first_not_of(" \t")));
    return false;
  });
  // The signature may span lines; it ends at the first ':' outside brackets.
  int depth = 0;
  std::size_t i = header.begin;
  for (; i < source.size(); ++i) {
    char c = source[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    else if (c == ')' || c == ']' || c == '}') --depth;
    else if (c == ':' && depth == 0) break;
  }
  std::size_t nl = source.find('\n', i);
  header.end = nl == std::string_view::npos ? source.size() : nl + 1;
  return header;
}

std::string strip_docstring(std::string_view context) {
  if (count_function_headers(context) != 1) return std::string(context);
  FunctionHeader header = find_function_header(context);
  std::size_t pos = header.end;
  // Skip blank lines between header and docstring.
  while (pos < context.size()) {
    std::size_t nl = context.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? context.size() : nl + 1;
    if (!is_blank(context.substr(pos, end - pos))) break;
    pos = end;
  }
  std::size_t lit = context.find_first_not_of(" \t", pos);
  if (lit == std::string_view::npos) return std::string(context);
  std::size_t q = lit;
  while (q < context.size() && q < lit + 2 && std::string_view("rRuUbB").find(context[q]) != std::string_view::npos) {
    ++q;
  }
  std::string_view rest = context.substr(q);
  std::string_view quote;
  if (rest.starts_with("\"\"\"")) quote = "\"\"\"";
  else if (rest.starts_with("'''")) quote = "'''";
  else return std::string(context);
  std::size_t close = context.find(quote, q + 3);
  if (close == std::string_view::npos) return std::string(context);
  std::size_t nl = context.find('\n', close + 3);
  std::size_t cut_end = nl == std::string_view::npos ? context.size() : nl + 1;
  std::string out(context.substr(0, header.end));
  out += context.substr(cut_end);
  return out;
}

PromptPackage build_coder_prompt(const TaskInstance& task, const PromptOptions& options) {
  PromptPackage p;
  p.channel = Channel::coder;
  if (task.prompt_style == PromptStyle::function_completion) {
    require_function_zero_shot(task);
    std::string base = with_newline(strip_docstring(task.context));
    FunctionHeader header = find_function_header(base);
    std::string indent = header.indent + "    ";
    p.text = base + indent + std::string(kTripleQuote) + task.instruction + "\n" + indent +
             std::string(kTripleQuote) + "\n";
    p.stop_sequences = function_completion_stops();
  } else {
    const TagSet& tags = options.tags;
    for (const auto& demo : task.demos) {
      p.text += tagged(tags.context, demo.context) + "\n";
      p.text += tagged(tags.instruction, demo.instruction) + "\n";
      p.text += tagged(tags.program, demo.program) + "\n\n";
    }
    p.text += tagged(tags.context, task.context) + "\n";
    p.text += tagged(tags.instruction, task.instruction) + "\n";
    p.text += "<" + tags.program + ">";
    p.stop_sequences = {"</" + tags.program + ">"};
  }
  p.scored_span = {p.text.size(), p.text.size()};
  return p;
}

PromptPackage build_reviewer_prompt(const TaskInstance& task, std::string_view program,
                                    const PromptOptions& options) {
  if (is_blank(program)) {
    throw PreconditionError("task '" + task.task_id + "': empty candidate body");
  }
  PromptPackage p;
  p.channel = Channel::reviewer;
  if (task.prompt_style == PromptStyle::function_completion) {
    require_function_zero_shot(task);
    std::string base = with_newline(strip_docstring(task.context));
    FunctionHeader header = find_function_header(base);
    std::string indent = header.indent + "    ";
    p.text = base + with_newline(std::string(program));
    p.text += header.indent + options.comment_marker + options.reviewer_cue + "\n";
    p.text += with_newline(base.substr(header.begin, header.end - header.begin));
    p.text += indent + std::string(kTripleQuote);
    p.scored_span.start = p.text.size();
    p.text += task.instruction;
    p.scored_span.end = p.text.size();
    p.text += "\n" + indent + std::string(kTripleQuote) + "\n";
  } else {
    const TagSet& tags = options.tags;
    for (const auto& demo : task.demos) {
      p.text += tagged(tags.context, demo.context) + "\n";
      p.text += tagged(tags.program, demo.program) + "\n";
      p.text += tagged(tags.instruction, demo.instruction) + "\n\n";
    }
    p.text += tagged(tags.context, task.context) + "\n";
    p.text += tagged(tags.program, program) + "\n";
    p.text += "<" + tags.instruction + ">";
    p.scored_span.start = p.text.size();
    p.text += task.instruction;
    p.scored_span.end = p.text.size();
    p.text += "</" + tags.instruction + ">";
  }
  if (p.scored_span.empty()) {
    throw PreconditionError("task '" + task.task_id + "': empty instruction");
  }
  return p;
}

PromptPackage build_reviewer_prompt(const TaskInstance& task, const Candidate& candidate,
                                    const PromptOptions& options) {
  if (candidate.rejection) {
    throw PreconditionError("candidate " + std::to_string(candidate.index) + " is rejected");
  }
  return build_reviewer_prompt(task, candidate.canonical_text, options);
}

PromptPackage build_prior_prompt(const TaskInstance& task, const PromptOptions&) {
  if (task.prompt_style != PromptStyle::function_completion) {
    throw PreconditionError("task '" + task.task_id +
                            "': prior prompts are only defined for function completion");
  }
  require_function_zero_shot(task);
  PromptPackage p;
  p.channel = Channel::prior;
  p.text = with_newline(strip_docstring(task.context));
  p.scored_span = {p.text.size(), p.text.size()};
  p.stop_sequences = function_completion_stops();
  return p;
}

}  // namespace crr
