#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <string>

#include "crr/lm_gateway.hpp"

namespace crr {

/// Hex SHA-256 of the NUL-joined parts.
std::string digest(std::initializer_list<std::string_view> parts);

/// Content-addressed on-disk cache in front of another backend. Entries are
/// keyed by a digest of (backend identity, operation, inputs) and written by
/// atomic rename, so concurrent writers are safe. Within one process a
/// striped lock per key keeps concurrent misses from duplicating a request.
class CachedBackend : public CompletionBackend {
 public:
  CachedBackend(CompletionBackend& inner, std::filesystem::path directory);

  std::string identity() const override { return inner_.identity(); }
  std::vector<ScoredText> sample(const SampleRequest& request) override;
  ScoredText score_continuation(std::string_view prompt, std::string_view continuation) override;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::filesystem::path entry_path(const std::string& key) const;
  std::mutex& stripe(const std::string& key);

  CompletionBackend& inner_;
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::array<std::mutex, 64> stripes_;
};

}  // namespace crr
