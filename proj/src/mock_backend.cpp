#include "crr/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "crr/errors.hpp"
#include "crr/rng.hpp"

namespace crr {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
         (static_cast<unsigned char>(c) & 0x80);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

std::string get_or(const json& j, const char* key, std::string fallback = {}) {
  return j.contains(key) ? j[key].get<std::string>() : fallback;
}

}  // namespace

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i + 1;
    if (is_space(text[i])) {
      while (j < text.size() && is_space(text[j])) ++j;
    } else if (is_word(text[i])) {
      while (j < text.size() && is_word(text[j])) ++j;
    }
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

MockScript MockScript::from_json(const json& j) {
  MockScript s;
  s.name = get_or(j, "name", s.name);
  s.seen_logprob = j.value("seen_logprob", s.seen_logprob);
  s.unseen_logprob = j.value("unseen_logprob", s.unseen_logprob);
  s.whitespace_logprob = j.value("whitespace_logprob", s.whitespace_logprob);
  s.jitter = j.value("jitter", s.jitter);
  for (const auto& r : j.value("rules", json::array())) {
    s.rules.push_back({get_or(r, "prompt_contains"), get_or(r, "prompt_excludes"),
                       get_or(r, "continuation_contains"), get_or(r, "continuation_excludes"),
                       r.value("bias", 0.0)});
  }
  for (const auto& set : j.value("program_sets", json::array())) {
    MockProgramSet ps{set.at("match").get<std::string>(), {}};
    for (const auto& p : set.at("programs")) {
      ps.programs.push_back({p.at("text").get<std::string>(), p.value("weight", 1.0)});
    }
    s.program_sets.push_back(std::move(ps));
  }
  if (s.seen_logprob > 0 || s.unseen_logprob > 0 || s.whitespace_logprob > 0 || s.jitter < 0) {
    throw ValidationError("mock script logprobs must be <= 0 and jitter >= 0");
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError("mock script " + path.string() + ": " + e.what());
  }
}

json MockScript::to_json() const {
  json rules = json::array();
  for (const auto& r : this->rules) {
    rules.push_back({{"prompt_contains", r.prompt_contains},
                     {"prompt_excludes", r.prompt_excludes},
                     {"continuation_contains", r.continuation_contains},
                     {"continuation_excludes", r.continuation_excludes},
                     {"bias", r.bias}});
  }
  json sets = json::array();
  for (const auto& ps : program_sets) {
    json programs = json::array();
    for (const auto& p : ps.programs) programs.push_back({{"text", p.text}, {"weight", p.weight}});
    sets.push_back({{"match", ps.match}, {"programs", programs}});
  }
  return {{"name", name},
          {"seen_logprob", seen_logprob},
          {"unseen_logprob", unseen_logprob},
          {"whitespace_logprob", whitespace_logprob},
          {"jitter", jitter},
          {"rules", rules},
          {"program_sets", sets}};
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

std::string MockBackend::identity() const {
  return "mock:" + script_.name + ":" + std::to_string(fnv1a(script_.to_json().dump()));
}

ScoredText MockBackend::score_unchecked(std::string_view prompt,
                                        std::string_view continuation) const {
  double bias = 0.0;
  for (const auto& r : script_.rules) {
    if (!r.prompt_contains.empty() && !contains(prompt, r.prompt_contains)) continue;
    if (!r.prompt_excludes.empty() && contains(prompt, r.prompt_excludes)) continue;
    if (!r.continuation_contains.empty() && !contains(continuation, r.continuation_contains)) continue;
    if (!r.continuation_excludes.empty() && contains(continuation, r.continuation_excludes)) continue;
    bias += r.bias;
  }
  std::vector<std::string> pieces = mock_tokenize(continuation);
  std::vector<double> logprobs;
  logprobs.reserve(pieces.size());
  std::string context = lower(prompt);
  for (const auto& piece : pieces) {
    double lp;
    if (is_space(piece.front())) {
      lp = script_.whitespace_logprob;
    } else {
      std::string key = lower(piece);
      lp = contains(context, key) ? script_.seen_logprob : script_.unseen_logprob;
      double u = static_cast<double>(splitmix64(fnv1a(key)) >> 11) * 0x1.0p-53;
      lp -= script_.jitter * u;
      lp += bias;
    }
    logprobs.push_back(std::min(lp, 0.0));
    context += lower(piece);
  }
  return make_scored_text(pieces, logprobs);
}

ScoredText MockBackend::score_continuation(std::string_view prompt, std::string_view continuation) {
  if (continuation.empty()) throw PreconditionError("empty continuation");
  ++score_calls_;
  return score_unchecked(prompt, continuation);
}

std::vector<ScoredText> MockBackend::sample(const SampleRequest& request) {
  request.validate();
  ++sample_calls_;
  const MockProgramSet* set = nullptr;
  for (const auto& ps : script_.program_sets) {
    if (contains(request.prompt, ps.match)) {
      set = &ps;
      break;
    }
  }
  const std::uint64_t base = mix_seed({request.seed.value_or(0), fnv1a(request.prompt)});
  std::vector<ScoredText> out;
  out.reserve(static_cast<std::size_t>(request.n));
  for (int i = 0; i < request.n; ++i) {
    std::mt19937_64 rng(mix_seed({base, static_cast<std::uint64_t>(i)}));
    std::string text;
    if (set && !set->programs.empty()) {
      double total = 0.0;
      for (const auto& p : set->programs) total += p.weight;
      double r = uniform_unit(rng) * total;
      std::size_t k = 0;
      for (; k + 1 < set->programs.size(); ++k) {
        r -= set->programs[k].weight;
        if (r < 0) break;
      }
      text = set->programs[k].text;
    } else {
      text = "    return " + std::to_string(uniform_below(rng, 100)) + "\n";
    }
    text = truncate_at_stop(text, request.stop_sequences);
    // Crude token cap: the mock tokenizer defines the token count.
    std::vector<std::string> pieces = mock_tokenize(text);
    if (pieces.size() > static_cast<std::size_t>(request.max_tokens)) {
      pieces.resize(static_cast<std::size_t>(request.max_tokens));
      text.clear();
      for (const auto& p : pieces) text += p;
    }
    out.push_back(text.empty() ? ScoredText{} : score_unchecked(request.prompt, text));
  }
  return out;
}

}  // namespace crr
