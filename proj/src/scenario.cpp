#include "chamber/scenario.hpp"

#include <algorithm>

#include "chamber/errors.hpp"
#include "chamber/profiles.hpp"

namespace chamber {

const std::vector<std::string>& default_reflection_questions() {
  static const std::vector<std::string> questions{
      "What did you do during committee?",
      "What senator did you agree most with, and which did you disagree most with?",
      "What progress was made today, and what held you back the most?",
  };
  return questions;
}

Scenario make_scenario(std::string scenario_id, std::string topic_prompt) {
  Scenario sc;
  sc.scenario_id = std::move(scenario_id);
  sc.topic_prompt = std::move(topic_prompt);
  sc.reflection_questions = default_reflection_questions();
  return sc;
}

void validate_scenario(const Scenario& sc) {
  if (sc.scenario_id.empty()) {
    throw ValidationError("scenario_id", "must be non-empty");
  }
  if (sc.topic_prompt.empty()) {
    throw ValidationError("topic_prompt", "must be non-empty");
  }
  if (sc.cycles < 1) {
    throw ValidationError("cycles", "must be >= 1, got " + std::to_string(sc.cycles));
  }
  int previous = 0;
  for (std::size_t i = 0; i < sc.perturbations.size(); ++i) {
    const auto& p = sc.perturbations[i];
    auto where = "perturbation " + std::to_string(i);
    if (p.after_cycle < 0 || p.after_cycle > sc.cycles) {
      throw ValidationError("perturbations", where + " has after_cycle " + std::to_string(p.after_cycle) +
                                                 " outside [0, " + std::to_string(sc.cycles) + "]");
    }
    if (p.after_cycle < previous) {
      throw ValidationError("perturbations", "must be sorted by after_cycle (" + where + ")");
    }
    if (p.content.empty()) {
      throw ValidationError("perturbations", where + " has empty content");
    }
    previous = p.after_cycle;
  }
  if (sc.reflection_questions.empty()) {
    throw ValidationError("reflection_questions", "must be non-empty");
  }
  if (std::any_of(sc.reflection_questions.begin(), sc.reflection_questions.end(),
                  [](const auto& q) { return q.empty(); })) {
    throw ValidationError("reflection_questions", "questions must be non-empty");
  }
  if (sc.context_window_k < 0) {
    throw ValidationError("context_window_k", "must be >= 0");
  }
  if (sc.decoding.debate_temperature < 0 || sc.decoding.interpretation_temperature < 0) {
    throw ValidationError("decoding", "temperatures must be >= 0");
  }
  if (sc.decoding.max_tokens <= 0) {
    throw ValidationError("decoding", "max_tokens must be > 0");
  }
}

void validate_scenario(const Scenario& sc, const Roster& roster) {
  validate_scenario(sc);
  if (const auto* ids = std::get_if<std::vector<std::string>>(&sc.reflect_agents)) {
    for (const auto& id : *ids) {
      if (!roster.find(id)) {
        throw ValidationError("reflect_agents", "agent \"" + id + "\" is not on the roster");
      }
    }
  }
}

std::vector<std::string> reflected_agents(const Scenario& sc, const Roster& roster) {
  std::vector<std::string> out;
  const auto* ids = std::get_if<std::vector<std::string>>(&sc.reflect_agents);
  for (const auto& m : roster.members()) {
    if (!ids || std::find(ids->begin(), ids->end(), m.agent_id) != ids->end()) {
      out.push_back(m.agent_id);
    }
  }
  return out;
}

Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["scenario_id"] = sc.scenario_id;
  j["topic_prompt"] = sc.topic_prompt;
  j["cycles"] = sc.cycles;
  Json perturbations = Json::array();
  for (const auto& p : sc.perturbations) {
    perturbations.push_back(Json{{"after_cycle", p.after_cycle}, {"content", p.content}});
  }
  j["perturbations"] = std::move(perturbations);
  j["reflection_questions"] = sc.reflection_questions;
  if (const auto* ids = std::get_if<std::vector<std::string>>(&sc.reflect_agents)) {
    j["reflect_agents"] = *ids;
  } else {
    j["reflect_agents"] = "all";
  }
  j["context_window_k"] = sc.context_window_k;
  j["decoding"] = Json{{"debate_temperature", sc.decoding.debate_temperature},
                       {"interpretation_temperature", sc.decoding.interpretation_temperature},
                       {"max_tokens", sc.decoding.max_tokens}};
  return j;
}

Scenario scenario_from_json(const Json& j) {
  Scenario sc = make_scenario(require_string(j, "scenario_id"), require_string(j, "topic_prompt"));
  if (j.contains("cycles")) {
    sc.cycles = static_cast<int>(require_integer(j, "cycles"));
  }
  if (j.contains("perturbations")) {
    const auto& list = j["perturbations"];
    if (!list.is_array()) {
      throw ValidationError("perturbations", "expected an array");
    }
    for (const auto& p : list) {
      sc.perturbations.push_back({static_cast<int>(require_integer(p, "after_cycle")), require_string(p, "content")});
    }
  }
  if (j.contains("reflection_questions")) {
    const auto& list = j["reflection_questions"];
    if (!list.is_array() || !std::all_of(list.begin(), list.end(), [](const Json& q) { return q.is_string(); })) {
      throw ValidationError("reflection_questions", "expected an array of strings");
    }
    sc.reflection_questions = list.get<std::vector<std::string>>();
  }
  if (j.contains("reflect_agents")) {
    const auto& sel = j["reflect_agents"];
    if (sel.is_string() && sel.get<std::string>() == "all") {
      sc.reflect_agents = AllAgents{};
    } else if (sel.is_array() && std::all_of(sel.begin(), sel.end(), [](const Json& a) { return a.is_string(); })) {
      sc.reflect_agents = sel.get<std::vector<std::string>>();
    } else {
      throw ValidationError("reflect_agents", "expected \"all\" or an array of agent ids");
    }
  }
  if (j.contains("context_window_k")) {
    sc.context_window_k = static_cast<int>(require_integer(j, "context_window_k"));
  }
  if (j.contains("decoding")) {
    const auto& d = j["decoding"];
    if (d.contains("debate_temperature")) sc.decoding.debate_temperature = require_number(d, "debate_temperature");
    if (d.contains("interpretation_temperature")) {
      sc.decoding.interpretation_temperature = require_number(d, "interpretation_temperature");
    }
    if (d.contains("max_tokens")) sc.decoding.max_tokens = static_cast<int>(require_integer(d, "max_tokens"));
  }
  validate_scenario(sc);
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_text_file(path, scenario_to_json(scenario).dump(2) + "\n");
}

}  // namespace chamber
