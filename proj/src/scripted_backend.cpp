#include "chamber/scripted_backend.hpp"

namespace chamber {

void Script::add(const std::string& agent_id, PromptPhase phase, std::string text) {
  queues[agent_id][std::string(to_string(phase))].push_back(std::move(text));
}

std::size_t Script::total() const {
  auto n = default_queue.size();
  for (const auto& [agent, phases] : queues) {
    for (const auto& [phase, queue] : phases) n += queue.size();
  }
  return n;
}

namespace {

std::deque<std::string> queue_from_json(const Json& list, const std::string& where) {
  if (!list.is_array()) {
    throw ValidationError(where, "expected an array of strings");
  }
  std::deque<std::string> queue;
  for (const auto& item : list) {
    if (!item.is_string()) {
      throw ValidationError(where, "expected an array of strings");
    }
    queue.push_back(item.get<std::string>());
  }
  return queue;
}

}  // namespace

Script script_from_json(const Json& j) {
  if (!j.is_object()) {
    throw ValidationError("script", "expected a JSON object");
  }
  Script s;
  if (j.contains("default")) {
    s.default_queue = queue_from_json(j["default"], "default");
  }
  if (j.contains("agents")) {
    const auto& agents = j["agents"];
    if (!agents.is_object()) {
      throw ValidationError("agents", "expected an object keyed by agent_id");
    }
    for (const auto& [agent, phases] : agents.items()) {
      if (!phases.is_object()) {
        throw ValidationError("agents." + agent, "expected an object keyed by phase");
      }
      for (const auto& [phase, list] : phases.items()) {
        parse_prompt_phase(phase);
        s.queues[agent][phase] = queue_from_json(list, "agents." + agent + "." + phase);
      }
    }
  }
  return s;
}

Json script_to_json(const Script& s) {
  Json agents = Json::object();
  for (const auto& [agent, phases] : s.queues) {
    Json by_phase = Json::object();
    for (const auto& [phase, queue] : phases) {
      by_phase[phase] = Json(std::vector<std::string>(queue.begin(), queue.end()));
    }
    agents[agent] = std::move(by_phase);
  }
  Json j;
  j["default"] = Json(std::vector<std::string>(s.default_queue.begin(), s.default_queue.end()));
  j["agents"] = std::move(agents);
  return j;
}

Script load_script(const std::filesystem::path& path) {
  return script_from_json(read_json_file(path));
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> default_queue) {
  script_.default_queue.assign(std::make_move_iterator(default_queue.begin()),
                               std::make_move_iterator(default_queue.end()));
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
  validate_request(request);
  std::lock_guard lock(mutex_);
  std::deque<std::string>* queue = &script_.default_queue;
  if (auto agent = script_.queues.find(request.route.agent_id); agent != script_.queues.end()) {
    if (auto phase = agent->second.find(request.route.phase); phase != agent->second.end()) {
      queue = &phase->second;
    }
  }
  if (queue->empty()) {
    throw BackendError(BackendErrorKind::malformed_reply, "script exhausted for agent \"" + request.route.agent_id +
                                                              "\" phase \"" + request.route.phase + "\"");
  }
  CompletionResult result{std::move(queue->front()), std::nullopt, ResultSource::scripted};
  queue->pop_front();
  return result;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return script_.total();
}

}  // namespace chamber
