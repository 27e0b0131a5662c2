#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "chamber/backend.hpp"

namespace chamber {

inline constexpr const char* kApiKeyEnvVar = "OPENAI_API_KEY";
inline constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";
inline constexpr const char* kDefaultModel = "gpt-3.5-turbo";

struct RetryPolicy {
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  int max_attempts = 5;
};

struct OpenAIConfig {
  std::string base_url = kDefaultBaseUrl;
  std::string api_key;  // empty: no Authorization header
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

// Reads the API key from the environment; empty when unset.
std::string api_key_from_env();

// Live backend speaking the chat-completions protocol:
// POST {base_url}/chat/completions with {model, messages, temperature, seed, max_tokens}.
class OpenAIBackend final : public ModelBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit OpenAIBackend(OpenAIConfig config, Sleeper sleeper = {});

  // Retries network and rate_limit failures with exponential backoff; auth
  // and malformed replies fail immediately.
  CompletionResult complete(const CompletionRequest& request) override;

  // Request body sent for `request` (the routing header is not included).
  static Json wire_body(const CompletionRequest& request);

 private:
  CompletionResult attempt(const CompletionRequest& request) const;

  OpenAIConfig config_;
  Sleeper sleeper_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace chamber
