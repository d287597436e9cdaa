#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "crr/lm_gateway.hpp"

namespace crr {

struct HttpBackendConfig {
  // Full URL of an OpenAI-compatible completions endpoint,
  // e.g. http://localhost:8000/v1/completions
  std::string endpoint;
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};

  /// Reads the key from CRR_API_KEY when `api_key` is empty.
  static HttpBackendConfig from_env(std::string endpoint, std::string model);
};

/// Completion backend speaking the OpenAI completions wire format.
/// Scoring uses echo with max_tokens = 0 over prompt + continuation.
class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string identity() const override;
  std::vector<ScoredText> sample(const SampleRequest& request) override;
  ScoredText score_continuation(std::string_view prompt, std::string_view continuation) override;

  nlohmann::json sample_body(const SampleRequest& request) const;
  nlohmann::json score_body(std::string_view prompt, std::string_view continuation) const;

 private:
  nlohmann::json post(const nlohmann::json& body);

  HttpBackendConfig config_;
  std::string base_;
  std::string path_;
};

/// Splits the echoed tokenization of prompt + continuation. Throws
/// BackendError when a token straddles the boundary or tokens do not
/// reproduce the text.
ScoredText split_echo_tokens(const nlohmann::json& logprobs, std::string_view prompt,
                             std::string_view continuation);

}  // namespace crr
