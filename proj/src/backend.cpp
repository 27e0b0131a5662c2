#include "chamber/backend.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

namespace chamber {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  throw ValidationError("role", "unknown role \"" + std::string(text) + "\"");
}

std::string_view to_string(ResultSource source) {
  switch (source) {
    case ResultSource::live: return "live";
    case ResultSource::scripted: return "scripted";
    case ResultSource::cache: return "cache";
  }
  return "live";
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::network: return "network";
    case BackendErrorKind::auth: return "auth";
    case BackendErrorKind::rate_limit: return "rate_limit";
    case BackendErrorKind::malformed_reply: return "malformed_reply";
    case BackendErrorKind::cache_miss: return "cache_miss";
  }
  return "network";
}

void validate_request(const CompletionRequest& request) {
  if (request.messages.empty()) {
    throw ValidationError("messages", "must be non-empty");
  }
  if (request.messages.front().role != Role::system) {
    throw ValidationError("messages", "first message must have role system");
  }
  if (request.params.max_tokens <= 0) {
    throw ValidationError("max_tokens", "must be > 0");
  }
  if (request.params.temperature < 0) {
    throw ValidationError("temperature", "must be >= 0");
  }
}

CompletionRequest make_request(const PromptBundle& bundle, std::string model, RoutingHeader route) {
  CompletionRequest req;
  req.messages = {{Role::system, bundle.system_text}, {Role::user, bundle.user_text}};
  req.params = {std::move(model), bundle.params.temperature, bundle.params.seed, bundle.params.max_tokens};
  req.route = std::move(route);
  return req;
}

Json request_to_json(const CompletionRequest& req) {
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    messages.push_back(Json{{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  Json j;
  j["model"] = req.params.model;
  j["temperature"] = req.params.temperature;
  j["seed"] = req.params.seed;
  j["max_tokens"] = req.params.max_tokens;
  j["route"] = Json{{"agent_id", req.route.agent_id}, {"phase", req.route.phase}};
  j["messages"] = std::move(messages);
  return j;
}

CompletionRequest request_from_json(const Json& j) {
  CompletionRequest req;
  req.params.model = require_string(j, "model");
  req.params.temperature = require_number(j, "temperature");
  req.params.seed = require_integer(j, "seed");
  req.params.max_tokens = static_cast<int>(require_integer(j, "max_tokens"));
  const auto& route = require_field(j, "route");
  req.route = {require_string(route, "agent_id"), require_string(route, "phase")};
  for (const auto& m : require_field(j, "messages")) {
    req.messages.push_back({parse_role(require_string(m, "role")), require_string(m, "content")});
  }
  return req;
}

namespace {

void put_bytes(std::string& out, std::string_view name, std::string_view bytes) {
  out += name;
  out += ' ';
  out += std::to_string(bytes.size());
  out += '\n';
  out += bytes;
  out += '\n';
}

void put_scalar(std::string& out, std::string_view name, std::string_view value) {
  out += name;
  out += ' ';
  out += value;
  out += '\n';
}

}  // namespace

std::string canonical_serialization(const CompletionRequest& req) {
  char temperature[64];
  std::snprintf(temperature, sizeof temperature, "%.17g", req.params.temperature);

  std::string out = "chamber-completion-request/1\n";
  put_bytes(out, "model", req.params.model);
  put_scalar(out, "temperature", temperature);
  put_scalar(out, "seed", std::to_string(req.params.seed));
  put_scalar(out, "max_tokens", std::to_string(req.params.max_tokens));
  put_bytes(out, "route.agent_id", req.route.agent_id);
  put_bytes(out, "route.phase", req.route.phase);
  put_scalar(out, "messages", std::to_string(req.messages.size()));
  for (const auto& m : req.messages) {
    put_bytes(out, to_string(m.role), m.content);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0x0f];
  }
  return hex;
}

CacheKey cache_key(const CompletionRequest& request) {
  return {sha256_hex(canonical_serialization(request))};
}

}  // namespace chamber
