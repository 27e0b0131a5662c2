#include "chamber/openai_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace chamber {

std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnvVar);
  return key ? std::string(key) : std::string();
}

OpenAIBackend::OpenAIBackend(OpenAIConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url", "expected scheme://host[:port][/path], got \"" + config_.base_url + "\"");
  }
  auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? std::string() : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

Json OpenAIBackend::wire_body(const CompletionRequest& req) {
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    messages.push_back(Json{{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  Json body;
  body["model"] = req.params.model;
  body["messages"] = std::move(messages);
  body["temperature"] = req.params.temperature;
  body["seed"] = req.params.seed;
  body["max_tokens"] = req.params.max_tokens;
  return body;
}

CompletionResult OpenAIBackend::attempt(const CompletionRequest& req) const {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  auto response = client.Post(path_prefix_ + "/chat/completions", headers, wire_body(req).dump(), "application/json");
  if (!response) {
    throw BackendError(BackendErrorKind::network, "request to " + config_.base_url +
                                                      " failed: " + httplib::to_string(response.error()));
  }
  const int status = response->status;
  if (status == 401 || status == 403) {
    throw BackendError(BackendErrorKind::auth, "HTTP " + std::to_string(status));
  }
  if (status == 429) {
    throw BackendError(BackendErrorKind::rate_limit, "HTTP 429");
  }
  if (status >= 500) {
    throw BackendError(BackendErrorKind::network, "HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw BackendError(BackendErrorKind::malformed_reply, "HTTP " + std::to_string(status) + ": " + response->body);
  }

  Json reply;
  try {
    reply = Json::parse(response->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendErrorKind::malformed_reply, std::string("unparseable body: ") + e.what());
  }
  const Json* content = nullptr;
  if (reply.is_object() && reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
    const auto& choice = reply["choices"][0];
    if (choice.is_object() && choice.contains("message") && choice["message"].is_object()) {
      auto it = choice["message"].find("content");
      if (it != choice["message"].end()) content = &*it;
    }
  }
  if (!content || !(content->is_string() || content->is_null())) {
    throw BackendError(BackendErrorKind::malformed_reply, "reply has no choices[0].message.content");
  }
  CompletionResult result{content->is_string() ? content->get<std::string>() : std::string(), std::nullopt,
                          ResultSource::live};
  if (reply.contains("usage") && reply["usage"].is_object()) {
    const auto& u = reply["usage"];
    result.usage = Usage{u.value("prompt_tokens", 0), u.value("completion_tokens", 0)};
  }
  return result;
}

CompletionResult OpenAIBackend::complete(const CompletionRequest& request) {
  validate_request(request);
  auto delay = config_.retry.base_delay;
  for (int attempt_no = 1;; ++attempt_no) {
    try {
      return attempt(request);
    } catch (const BackendError& e) {
      if (!e.retriable() || attempt_no >= config_.retry.max_attempts) {
        throw;
      }
    }
    sleeper_(delay);
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * config_.retry.factor));
  }
}

}  // namespace chamber
