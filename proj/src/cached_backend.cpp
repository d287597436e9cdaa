#include "crr/cached_backend.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "crr/corpus.hpp"
#include "crr/errors.hpp"

namespace crr {

using nlohmann::json;

std::string digest(std::initializer_list<std::string_view> parts) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  const char sep = '\0';
  for (auto p : parts) {
    // Length prefix keeps ("ab","c") and ("a","bc") apart.
    std::string len = std::to_string(p.size());
    EVP_DigestUpdate(ctx, len.data(), len.size());
    EVP_DigestUpdate(ctx, &sep, 1);
    EVP_DigestUpdate(ctx, p.data(), p.size());
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  EVP_DigestFinal_ex(ctx, md, &n);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < n; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

namespace {

json scored_to_json(const ScoredText& st) {
  json tokens = json::array();
  for (const auto& t : st.tokens) tokens.push_back({t.text, t.logprob});
  return {{"text", st.text}, {"tokens", tokens}};
}

ScoredText scored_from_json(const json& j) {
  std::vector<std::string> pieces;
  std::vector<double> lps;
  for (const auto& t : j.at("tokens")) {
    pieces.push_back(t.at(0).get<std::string>());
    lps.push_back(t.at(1).get<double>());
  }
  ScoredText st = make_scored_text(pieces, lps);
  st.text = j.at("text").get<std::string>();
  return st;
}

std::optional<json> read_entry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
}

void write_entry(const std::filesystem::path& path, const json& j) {
  std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, j.dump());
}

}  // namespace

CachedBackend::CachedBackend(CompletionBackend& inner, std::filesystem::path directory)
    : inner_(inner), dir_(std::move(directory)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path CachedBackend::entry_path(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::mutex& CachedBackend::stripe(const std::string& key) {
  return stripes_[std::stoul(key.substr(0, 2), nullptr, 16) % stripes_.size()];
}

std::vector<ScoredText> CachedBackend::sample(const SampleRequest& request) {
  request.validate();
  json params = {{"temperature", request.temperature},
                 {"max_tokens", request.max_tokens},
                 {"n", request.n},
                 {"stop", request.stop_sequences},
                 {"seed", request.seed ? json(*request.seed) : json(nullptr)}};
  const std::string key = digest({inner_.identity(), "sample", request.prompt, params.dump()});
  const auto path = entry_path(key);
  std::lock_guard lock(stripe(key));
  if (auto cached = read_entry(path)) {
    ++hits_;
    std::vector<ScoredText> out;
    for (const auto& item : *cached) out.push_back(scored_from_json(item));
    return out;
  }
  ++misses_;
  std::vector<ScoredText> out = inner_.sample(request);
  json entry = json::array();
  for (const auto& st : out) entry.push_back(scored_to_json(st));
  write_entry(path, entry);
  return out;
}

ScoredText CachedBackend::score_continuation(std::string_view prompt, std::string_view continuation) {
  if (continuation.empty()) throw PreconditionError("empty continuation");
  const std::string key = digest({inner_.identity(), "score", prompt, continuation});
  const auto path = entry_path(key);
  std::lock_guard lock(stripe(key));
  if (auto cached = read_entry(path)) {
    ++hits_;
    return scored_from_json(*cached);
  }
  ++misses_;
  ScoredText out = inner_.score_continuation(prompt, continuation);
  write_entry(path, scored_to_json(out));
  return out;
}

}  // namespace crr
