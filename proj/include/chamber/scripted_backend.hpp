#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "chamber/backend.hpp"

namespace chamber {

// Canned completions keyed by agent and phase, plus an unrouted default queue.
// Document form: {"default": [...], "agents": {"<agent_id>": {"<phase>": [...]}}}.
struct Script {
  std::deque<std::string> default_queue;
  std::map<std::string, std::map<std::string, std::deque<std::string>>> queues;

  void add(const std::string& agent_id, PromptPhase phase, std::string text);
  std::size_t total() const;
};

Script script_from_json(const Json& json);
Json script_to_json(const Script& script);
Script load_script(const std::filesystem::path& path);

// Pops the queue matching the request's routing header. An agent that has a
// queue for the phase never falls back to the default queue.
class ScriptedBackend final : public ModelBackend {
 public:
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  explicit ScriptedBackend(std::vector<std::string> default_queue);

  // BackendError{malformed_reply, "script exhausted ..."} naming agent and phase.
  CompletionResult complete(const CompletionRequest& request) override;

  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  Script script_;
};

}  // namespace chamber
