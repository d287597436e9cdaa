#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "crr/http_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "crr/errors.hpp"

namespace crr {

using nlohmann::json;

HttpBackendConfig HttpBackendConfig::from_env(std::string endpoint, std::string model) {
  HttpBackendConfig c;
  c.endpoint = std::move(endpoint);
  c.model = std::move(model);
  if (const char* key = std::getenv("CRR_API_KEY")) c.api_key = key;
  return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  std::size_t scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) {
    throw UsageError("backend endpoint must be an http(s) URL: " + config_.endpoint);
  }
  std::size_t slash = config_.endpoint.find('/', scheme + 3);
  base_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/completions" : config_.endpoint.substr(slash);
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

std::string HttpBackend::identity() const { return "http:" + config_.endpoint + ":" + config_.model; }

json HttpBackend::sample_body(const SampleRequest& request) const {
  json body = {{"prompt", request.prompt},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens},
               {"n", request.n},
               {"stop", request.stop_sequences},
               {"logprobs", 1},
               {"echo", false}};
  if (!config_.model.empty()) body["model"] = config_.model;
  return body;
}

json HttpBackend::score_body(std::string_view prompt, std::string_view continuation) const {
  json body = {{"prompt", std::string(prompt) + std::string(continuation)},
               {"temperature", 0.0},
               {"max_tokens", 0},
               {"n", 1},
               {"logprobs", 1},
               {"echo", true}};
  if (!config_.model.empty()) body["model"] = config_.model;
  return body;
}

json HttpBackend::post(const json& body) {
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  std::string payload = body.dump();
  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(base_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw BackendError(std::string("malformed backend response: ") + e.what(), false);
    }
  }
  throw BackendError(identity() + ": " + last_error + " after " +
                         std::to_string(config_.max_attempts) + " attempts",
                     true);
}

namespace {

const json& choices_of(const json& response) {
  auto it = response.find("choices");
  if (it == response.end() || !it->is_array()) {
    throw BackendError("backend response has no choices array", false);
  }
  return *it;
}

bool has_token_logprobs(const json& choice) {
  auto lp = choice.find("logprobs");
  return lp != choice.end() && lp->is_object() && lp->contains("tokens") &&
         lp->contains("token_logprobs");
}

}  // namespace

std::vector<ScoredText> HttpBackend::sample(const SampleRequest& request) {
  request.validate();
  const json response = post(sample_body(request));
  std::vector<json> choices(choices_of(response).begin(), choices_of(response).end());
  std::stable_sort(choices.begin(), choices.end(), [](const json& a, const json& b) {
    return a.value("index", 0) < b.value("index", 0);
  });
  std::vector<ScoredText> out;
  for (const auto& choice : choices) {
    ScoredText st;
    st.text = truncate_at_stop(choice.value("text", std::string()), request.stop_sequences);
    if (has_token_logprobs(choice)) {
      const json& lp = choice["logprobs"];
      std::size_t pos = 0;
      for (std::size_t i = 0; i < lp["tokens"].size() && pos < st.text.size(); ++i) {
        std::string tok = lp["tokens"][i].get<std::string>();
        const json& v = lp["token_logprobs"][i];
        if (v.is_null() || pos + tok.size() > st.text.size() ||
            st.text.compare(pos, tok.size(), tok) != 0) {
          st.tokens.clear();
          break;
        }
        st.tokens.push_back({tok, pos, pos + tok.size(), std::min(v.get<double>(), 0.0)});
        pos += tok.size();
      }
      if (pos != st.text.size()) st.tokens.clear();
    }
    out.push_back(std::move(st));
  }
  if (out.size() != static_cast<std::size_t>(request.n)) {
    throw BackendError("backend returned " + std::to_string(out.size()) + " choices, expected " +
                           std::to_string(request.n),
                       false);
  }
  return out;
}

ScoredText split_echo_tokens(const json& logprobs, std::string_view prompt,
                             std::string_view continuation) {
  const std::size_t boundary = prompt.size();
  const std::size_t total = prompt.size() + continuation.size();
  std::string full = std::string(prompt) + std::string(continuation);
  const json& tokens = logprobs.at("tokens");
  const json& values = logprobs.at("token_logprobs");
  ScoredText out;
  out.text = std::string(continuation);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tokens.size() && pos < total; ++i) {
    std::string tok = tokens[i].get<std::string>();
    std::size_t start = pos, end = pos + tok.size();
    pos = end;
    if (end > total || full.compare(start, tok.size(), tok) != 0) {
      throw BackendError("echoed tokens do not reproduce the scored text", false);
    }
    if (end <= boundary) continue;
    if (start < boundary) {
      throw BackendError("token straddles the prompt/continuation boundary at offset " +
                             std::to_string(boundary),
                         false);
    }
    if (values[i].is_null()) throw BackendError("missing logprob for continuation token", false);
    out.tokens.push_back(
        {tok, start - boundary, end - boundary, std::min(values[i].get<double>(), 0.0)});
  }
  if (pos != total) throw BackendError("echoed tokens do not cover the scored text", false);
  return out;
}

ScoredText HttpBackend::score_continuation(std::string_view prompt, std::string_view continuation) {
  if (continuation.empty()) throw PreconditionError("empty continuation");
  const json response = post(score_body(prompt, continuation));
  const json& choices = choices_of(response);
  if (choices.empty() || !has_token_logprobs(choices[0])) {
    throw BackendError("backend does not return token logprobs; scoring unavailable", false);
  }
  return split_echo_tokens(choices[0]["logprobs"], prompt, continuation);
}

}  // namespace crr
