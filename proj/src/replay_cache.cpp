#include "chamber/replay_cache.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <mutex>

namespace chamber {

void stderr_warning(std::string_view message) {
  std::cerr << "warning: " << message << '\n';
}

namespace {

std::string utc_now_iso8601() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ReplayCache::ReplayCache(std::filesystem::path dir, WarningSink warn) : dir_(std::move(dir)), warn_(std::move(warn)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (!std::filesystem::is_directory(dir_)) {
    throw IoError("cache directory unavailable: " + dir_.string());
  }
}

std::filesystem::path ReplayCache::path_for(const CacheKey& key) const {
  return dir_ / (key.digest + ".json");
}

std::shared_mutex& ReplayCache::lock_for(const CacheKey& key) const {
  return locks_[std::hash<std::string>{}(key.digest) % locks_.size()];
}

void ReplayCache::record(const CompletionRequest& request, const CompletionResult& result) {
  auto key = cache_key(request);
  auto path = path_for(key);
  Json entry;
  entry["request"] = request_to_json(request);
  entry["text"] = result.text;
  entry["recorded_at"] = utc_now_iso8601();

  std::unique_lock lock(lock_for(key));
  if (std::filesystem::exists(path)) {
    warn_("overwriting cache entry " + key.digest);
  }
  write_text_file(path, entry.dump(2) + "\n");
}

std::optional<CompletionResult> ReplayCache::lookup(const CompletionRequest& request) const {
  auto key = cache_key(request);
  auto path = path_for(key);
  std::string text;
  {
    std::shared_lock lock(lock_for(key));
    if (!std::filesystem::exists(path)) {
      return std::nullopt;
    }
    text = read_text_file(path);
  }
  auto entry = parse_json(text, path.string());
  if (request_to_json(request_from_json(require_field(entry, "request"))) != request_to_json(request)) {
    throw IoError("cache entry " + path.string() + " does not match its request");
  }
  return CompletionResult{require_string(entry, "text"), std::nullopt, ResultSource::cache};
}

ReplayBackend::ReplayBackend(std::shared_ptr<ReplayCache> cache, std::shared_ptr<ModelBackend> upstream)
    : cache_(std::move(cache)), upstream_(std::move(upstream)) {}

CompletionResult ReplayBackend::complete(const CompletionRequest& request) {
  validate_request(request);
  if (auto hit = cache_->lookup(request)) {
    return *std::move(hit);
  }
  if (!upstream_) {
    throw BackendError(BackendErrorKind::cache_miss,
                       "cache miss for agent \"" + request.route.agent_id + "\" phase \"" + request.route.phase +
                           "\" (key " + cache_key(request).digest + ") and recording is disabled");
  }
  auto result = upstream_->complete(request);
  cache_->record(request, result);
  return result;
}

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> upstream, std::shared_ptr<ReplayCache> cache)
    : upstream_(std::move(upstream)), cache_(std::move(cache)) {}

CompletionResult RecordingBackend::complete(const CompletionRequest& request) {
  auto result = upstream_->complete(request);
  cache_->record(request, result);
  return result;
}

}  // namespace chamber
