#include "crr/degeneracy.hpp"

#include <cctype>
#include <vector>

#include <zlib.h>

#include "crr/errors.hpp"
#include "crr/prompt_builder.hpp"

namespace crr {

void RejectionConfig::validate() const {
  if (!(compress_ratio_threshold > 1.0)) {
    throw ValidationError("compress_ratio_threshold must be > 1");
  }
}

double compression_ratio(std::string_view text) {
  if (text.empty()) return 0.0;
  uLongf bound = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buf(bound);
  int rc = compress2(buf.data(), &bound, reinterpret_cast<const Bytef*>(text.data()),
                     static_cast<uLong>(text.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error("zlib compression failed");
  return static_cast<double>(text.size()) / static_cast<double>(bound);
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos; }

std::string_view trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

// A deliberately small Python lexer: enough to find comments, strings,
// identifiers and bracket depth. It does not validate syntax.

enum class Kind { ws, newline, comment, string, name, op, continuation };

struct Tok {
  Kind kind;
  std::string text;
  int depth = 0;  // bracket depth before this token
};

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || (static_cast<unsigned char>(c) & 0x80); }
bool is_name_char(char c) { return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

bool is_string_prefix(std::string_view s) {
  if (s.size() > 2) return false;
  for (char c : s) {
    if (std::string_view("rRbBuUfF").find(c) == std::string_view::npos) return false;
  }
  return true;
}

// Returns end offset of a string literal whose quote begins at `q`, or npos.
std::size_t scan_string(std::string_view src, std::size_t q) {
  char quote = src[q];
  bool triple = src.substr(q, 3) == std::string(3, quote);
  std::size_t i = q + (triple ? 3 : 1);
  while (i < src.size()) {
    char c = src[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (triple) {
      if (src.substr(i, 3) == std::string(3, quote)) return i + 3;
    } else {
      if (c == quote) return i + 1;
      if (c == '\n') return std::string_view::npos;
    }
    ++i;
  }
  return std::string_view::npos;
}

std::optional<std::vector<Tok>> lex(std::string_view src) {
  std::vector<Tok> toks;
  int depth = 0;
  std::size_t i = 0;
  auto push = [&](Kind k, std::size_t begin, std::size_t end) {
    toks.push_back({k, std::string(src.substr(begin, end - begin)), depth});
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '\n') {
      push(Kind::newline, i, i + 1);
      ++i;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
      std::size_t j = i;
      while (j < src.size() && (src[j] == ' ' || src[j] == '\t' || src[j] == '\r' || src[j] == '\f')) ++j;
      push(Kind::ws, i, j);
      i = j;
    } else if (c == '#') {
      std::size_t j = src.find('\n', i);
      if (j == std::string_view::npos) j = src.size();
      push(Kind::comment, i, j);
      i = j;
    } else if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
      push(Kind::continuation, i, i + 2);
      i += 2;
    } else if (c == '"' || c == '\'') {
      std::size_t end = scan_string(src, i);
      if (end == std::string_view::npos) return std::nullopt;
      push(Kind::string, i, end);
      i = end;
    } else if (is_name_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_name_char(src[j])) ++j;
      if (j < src.size() && (src[j] == '"' || src[j] == '\'') && is_string_prefix(src.substr(i, j - i))) {
        std::size_t end = scan_string(src, j);
        if (end == std::string_view::npos) return std::nullopt;
        push(Kind::string, i, end);
        i = end;
      } else {
        push(Kind::name, i, j);
        i = j;
      }
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && (is_name_char(src[j]) || src[j] == '.')) ++j;
      push(Kind::name, i, j);
      i = j;
    } else {
      std::size_t len = 1;
      std::string_view two = src.substr(i, 2);
      if (two == "==" || two == "!=" || two == "<=" || two == ">=" || two == ":=" || two == "->") len = 2;
      if (c == ')' || c == ']' || c == '}') {
        if (--depth < 0) return std::nullopt;
      }
      toks.push_back({Kind::op, std::string(src.substr(i, len)), c == ')' || c == ']' || c == '}' ? depth + 1 : depth});
      if (c == '(' || c == '[' || c == '{') ++depth;
      i += len;
    }
  }
  if (depth != 0) return std::nullopt;
  return toks;
}

bool significant(const Tok& t) {
  return t.kind != Kind::ws && t.kind != Kind::newline && t.kind != Kind::comment &&
         t.kind != Kind::continuation;
}

std::string task_function_name(const TaskInstance& task) {
  if (task.prompt_style != PromptStyle::function_completion) return {};
  if (count_function_headers(task.context) != 1) return {};
  return find_function_header(task.context).name;
}

}  // namespace

std::optional<std::string> try_canonicalize(std::string_view source, const TaskInstance& task) {
  if (task.language != Language::python_function) return std::string(source);
  auto lexed = lex(source);
  if (!lexed) return std::nullopt;
  std::vector<Tok>& toks = *lexed;
  const std::string fname = task_function_name(task);

  std::vector<bool> drop(toks.size(), false);
  std::vector<std::size_t> line;  // significant token indices of one logical line
  auto process_line = [&] {
    if (line.empty()) return;
    bool all_strings = true;
    for (auto k : line) all_strings = all_strings && toks[k].kind == Kind::string;
    if (all_strings) {
      for (auto k : line) drop[k] = true;
      return;
    }
    const Tok& head = toks[line.front()];
    if (head.kind == Kind::name && head.text == "assert") {
      bool after_comma = false;
      for (auto k : line) {
        if (toks[k].kind == Kind::op && toks[k].text == "," && toks[k].depth == head.depth) after_comma = true;
        else if (after_comma && toks[k].kind == Kind::string) toks[k].text = "\"\"";
      }
    }
    for (std::size_t p = 0; p + 1 < line.size(); ++p) {
      const Tok& t = toks[line[p]];
      const Tok& open = toks[line[p + 1]];
      bool attr = p > 0 && toks[line[p - 1]].text == ".";
      if (t.kind != Kind::name || t.text != "print" || attr || open.text != "(") continue;
      const int arg_depth = open.depth + 1;
      for (std::size_t q = p + 2; q < line.size(); ++q) {
        Tok& a = toks[line[q]];
        if (a.kind == Kind::op && a.depth == open.depth) break;  // closing paren
        if (a.kind == Kind::string && a.depth == arg_depth && toks[line[q - 1]].text != "=") {
          a.text = "\"\"";
        }
      }
    }
    if (!fname.empty()) {
      for (std::size_t p = 0; p < line.size(); ++p) {
        Tok& t = toks[line[p]];
        bool attr = p > 0 && toks[line[p - 1]].text == ".";
        if (t.kind == Kind::name && t.text == fname && !attr) t.text = kCanonicalFunctionName;
      }
    }
    line.clear();
  };
  for (std::size_t k = 0; k < toks.size(); ++k) {
    if (toks[k].kind == Kind::comment) drop[k] = true;
    if (toks[k].kind == Kind::newline && toks[k].depth == 0) {
      bool continued = k > 0 && toks[k - 1].kind == Kind::continuation;
      if (!continued) process_line();
    } else if (significant(toks[k])) {
      line.push_back(k);
    }
  }
  process_line();

  // Re-emit, dropping physical lines left without content and trailing
  // whitespace where content remains.
  std::string out, buffer;
  bool has_content = false;
  auto flush = [&](bool newline) {
    if (has_content) {
      std::size_t e = buffer.find_last_not_of(" \t\r\f");
      buffer.erase(e == std::string::npos ? 0 : e + 1);
      out += buffer;
      if (newline) out += '\n';
    }
    buffer.clear();
    has_content = false;
  };
  for (std::size_t k = 0; k < toks.size(); ++k) {
    if (drop[k]) continue;
    if (toks[k].kind == Kind::newline) {
      flush(true);
      continue;
    }
    buffer += toks[k].text;
    if (toks[k].kind != Kind::ws) has_content = true;
  }
  flush(false);
  return out;
}

std::string canonicalize(std::string_view source, const TaskInstance& task) {
  auto canonical = try_canonicalize(source, task);
  return canonical ? *canonical : std::string(source);
}

std::optional<Rejection> reject_empty_or_trivial(const Candidate& candidate,
                                                 const TaskInstance& task,
                                                 const RejectionConfig& config) {
  const std::string& text = candidate.canonical_text;
  if (blank(text)) return Rejection::empty;
  if (!config.trivial_patterns_enabled || task.prompt_style != PromptStyle::function_completion) {
    return std::nullopt;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view ln = std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    std::size_t hash = ln.find('#');
    std::string_view stmt = trim(hash == std::string_view::npos ? ln : ln.substr(0, hash));
    if (!stmt.empty() && stmt != "return" && stmt != "pass") return std::nullopt;
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return Rejection::trivial;
}

std::optional<Rejection> reject_repetitive(const Candidate& candidate, const RejectionConfig& config) {
  if (candidate.raw_text.empty()) return std::nullopt;
  if (compression_ratio(candidate.raw_text) > config.compress_ratio_threshold) {
    return Rejection::repetitive;
  }
  return std::nullopt;
}

std::optional<Rejection> apply_rejection(Candidate& candidate, const TaskInstance& task,
                                         const RejectionConfig& config) {
  candidate.canonical_text = canonicalize(candidate.raw_text, task);
  candidate.rejection = reject_empty_or_trivial(candidate, task, config);
  if (!candidate.rejection) candidate.rejection = reject_repetitive(candidate, config);
  return candidate.rejection;
}

std::string_view to_string(DegenerateKind kind) {
  switch (kind) {
    case DegenerateKind::return_only: return "ReturnOnly";
    case DegenerateKind::repetitive: return "Repetitive";
    case DegenerateKind::copy_prompt: return "CopyPrompt";
  }
  return "?";
}

DegenerateKind parse_degenerate_kind(std::string_view s) {
  for (auto k : kDegenerateKinds) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown degenerate kind '" + std::string(s) + "'");
}

Candidate make_degenerate(DegenerateKind kind, const TaskInstance& task, int index) {
  if (task.prompt_style != PromptStyle::function_completion) {
    throw PreconditionError("degenerate constructs need a function-completion task");
  }
  const std::string indent = find_function_header(task.context).indent + "    ";
  std::string body;
  switch (kind) {
    case DegenerateKind::return_only:
      body = indent + "return\n";
      break;
    case DegenerateKind::repetitive:
      for (int i = 1; i <= 50; ++i) body += indent + "print(" + std::to_string(i) + ")\n";
      break;
    case DegenerateKind::copy_prompt: {
      std::string_view rest = task.instruction;
      while (!rest.empty()) {
        std::size_t nl = rest.find('\n');
        std::string_view ln = trim(rest.substr(0, nl));
        if (!ln.empty()) body += indent + "# " + std::string(ln) + "\n";
        if (nl == std::string_view::npos) break;
        rest.remove_prefix(nl + 1);
      }
      if (body.empty()) body = indent + "#\n";
      break;
    }
  }
  Candidate c;
  c.task_id = task.task_id;
  c.index = index;
  c.raw_text = body;
  c.canonical_text = body;
  return c;
}

}  // namespace crr
