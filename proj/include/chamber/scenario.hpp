#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "chamber/json.hpp"

namespace chamber {

class Roster;

struct ScheduledPerturbation {
  int after_cycle = 0;  // 0 = after the opening statements, before cycle 1
  std::string content;

  friend bool operator==(const ScheduledPerturbation&, const ScheduledPerturbation&) = default;
};

struct DecodingDefaults {
  double debate_temperature = 0.7;
  double interpretation_temperature = 0.0;
  int max_tokens = 400;

  friend bool operator==(const DecodingDefaults&, const DecodingDefaults&) = default;
};

// Either every roster member, or an explicit list of agent ids (reflected in roster order).
struct AllAgents {
  friend bool operator==(AllAgents, AllAgents) = default;
};
using ReflectSelection = std::variant<AllAgents, std::vector<std::string>>;

struct Scenario {
  static constexpr int kDefaultCycles = 3;
  static constexpr int kDefaultContextWindow = 12;

  std::string scenario_id;
  std::string topic_prompt;
  int cycles = kDefaultCycles;
  std::vector<ScheduledPerturbation> perturbations;
  std::vector<std::string> reflection_questions;
  ReflectSelection reflect_agents = AllAgents{};
  int context_window_k = kDefaultContextWindow;
  DecodingDefaults decoding;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// The three post-debate questions every agent is asked by default.
const std::vector<std::string>& default_reflection_questions();

// Scenario with defaults filled in (cycles, questions, window, decoding).
Scenario make_scenario(std::string scenario_id, std::string topic_prompt);

// Throws ValidationError. With a roster, also checks reflect_agents ids.
void validate_scenario(const Scenario& scenario);
void validate_scenario(const Scenario& scenario, const Roster& roster);

// Agent ids to question after the debate, in roster order.
std::vector<std::string> reflected_agents(const Scenario& scenario, const Roster& roster);

Json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const Json& json);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace chamber
