#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/errors.hpp"
#include "chamber/json.hpp"
#include "chamber/prompting.hpp"

namespace chamber {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct RequestParams {
  std::string model;
  double temperature = 0.7;
  std::int64_t seed = 0;
  int max_tokens = 400;

  friend bool operator==(const RequestParams&, const RequestParams&) = default;
};

// Routing metadata set by the engine. Never sent over the wire; the
// scripted backend uses it to pick a queue.
struct RoutingHeader {
  std::string agent_id;
  std::string phase;

  friend bool operator==(const RoutingHeader&, const RoutingHeader&) = default;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  RequestParams params;
  RoutingHeader route;

  friend bool operator==(const CompletionRequest&, const CompletionRequest&) = default;
};

// Throws ValidationError: messages non-empty, first message is the system prompt.
void validate_request(const CompletionRequest& request);

CompletionRequest make_request(const PromptBundle& bundle, std::string model, RoutingHeader route);

Json request_to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const Json& json);

enum class ResultSource { live, scripted, cache };

std::string_view to_string(ResultSource source);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct CompletionResult {
  std::string text;
  std::optional<Usage> usage;
  ResultSource source = ResultSource::live;
};

enum class BackendErrorKind { network, auth, rate_limit, malformed_reply, cache_miss };

std::string_view to_string(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& message)
      : Error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}
  const char* type_name() const noexcept override { return "BackendError"; }
  BackendErrorKind kind() const noexcept { return kind_; }
  // network and rate_limit failures may succeed on retry; the rest are terminal.
  bool retriable() const noexcept {
    return kind_ == BackendErrorKind::network || kind_ == BackendErrorKind::rate_limit;
  }

 private:
  BackendErrorKind kind_;
};

// The model-completion contract. Implementations are safe for concurrent callers.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

struct CacheKey {
  std::string digest;  // lowercase hex SHA-256

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

// Length-prefixed, fixed-order byte serialization of a request. Message
// content is byte-significant.
std::string canonical_serialization(const CompletionRequest& request);

CacheKey cache_key(const CompletionRequest& request);

std::string sha256_hex(std::string_view data);

}  // namespace chamber
