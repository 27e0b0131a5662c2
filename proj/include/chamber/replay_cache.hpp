#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string_view>

#include "chamber/backend.hpp"

namespace chamber {

using WarningSink = std::function<void(std::string_view)>;

// Writes "warning: <message>" to stderr.
void stderr_warning(std::string_view message);

// Content-addressed store of request -> completion text, one file per key:
// {dir}/{digest}.json holding {"request", "text", "recorded_at"}.
// Concurrent lookups are allowed; writes to one key are exclusive.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir, WarningSink warn = stderr_warning);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path_for(const CacheKey& key) const;

  // Overwrites an existing entry for the same key and emits a warning.
  void record(const CompletionRequest& request, const CompletionResult& result);

  // source = cache on a hit. Throws IoError when the stored request does not
  // match (corrupt or colliding entry).
  std::optional<CompletionResult> lookup(const CompletionRequest& request) const;

 private:
  std::shared_mutex& lock_for(const CacheKey& key) const;

  std::filesystem::path dir_;
  WarningSink warn_;
  mutable std::array<std::shared_mutex, 32> locks_;
};

// Serves from the cache. On a miss, forwards to `upstream` and records the
// result when one is configured; otherwise fails with BackendError{cache_miss}.
// Without an upstream this backend performs no network activity at all.
class ReplayBackend final : public ModelBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<ReplayCache> cache, std::shared_ptr<ModelBackend> upstream = nullptr);

  CompletionResult complete(const CompletionRequest& request) override;

 private:
  std::shared_ptr<ReplayCache> cache_;
  std::shared_ptr<ModelBackend> upstream_;
};

// Always forwards to `upstream`, recording every result into the cache.
class RecordingBackend final : public ModelBackend {
 public:
  RecordingBackend(std::shared_ptr<ModelBackend> upstream, std::shared_ptr<ReplayCache> cache);

  CompletionResult complete(const CompletionRequest& request) override;

 private:
  std::shared_ptr<ModelBackend> upstream_;
  std::shared_ptr<ReplayCache> cache_;
};

}  // namespace chamber
