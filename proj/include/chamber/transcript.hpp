#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/json.hpp"
#include "chamber/memory.hpp"
#include "chamber/profiles.hpp"
#include "chamber/prompting.hpp"
#include "chamber/scenario.hpp"

namespace chamber {

enum class EventKind { scenario_prompt, opening_statement, turn, perturbation, reflection_answer };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct TranscriptEvent {
  std::int64_t index = 0;  // gapless event ordinal from 0
  Timestep timestep = 0;   // memory clock value the event was written at
  EventKind kind = EventKind::scenario_prompt;
  std::optional<int> cycle;
  std::optional<std::string> agent;
  std::string content;
  std::optional<TurnAction> action;     // turn only
  std::optional<std::string> question;  // reflection_answer only

  friend bool operator==(const TranscriptEvent&, const TranscriptEvent&) = default;
};

// Deterministic header: no wall-clock values.
struct TranscriptHeader {
  std::string run_id;
  std::string scenario_id;
  std::string model;
  std::int64_t seed = 0;
  bool complete = false;
  std::vector<std::int64_t> operator_events;  // indices injected by an operator
  std::optional<Roster> roster;

  friend bool operator==(const TranscriptHeader&, const TranscriptHeader&) = default;
};

struct Transcript {
  TranscriptHeader header;
  std::vector<TranscriptEvent> events;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

Json event_to_json(const TranscriptEvent& event);
TranscriptEvent event_from_json(const Json& json);

// One header line then one event per line, each terminated by '\n'.
std::string to_jsonl(const Transcript& transcript);
Transcript parse_jsonl(std::string_view text);
Transcript load_transcript(const std::filesystem::path& path);

// Human-readable rendering for transcript.txt.
std::string render_text(const Transcript& transcript);

// Reference checker for the event grammar
//   scenario_prompt opening^A perturbation* (turn^A perturbation*)^C reflection_answer^(Q*R)
// plus roster order, cycle numbering, the perturbation schedule, reflection
// order, field presence, and gapless indices. Operator-injected events (listed
// in the header) are checked for boundary placement and then set aside.
// Returns human-readable violations; empty means accepted.
std::vector<std::string> check_grammar(const Transcript& transcript, const Scenario& scenario);

}  // namespace chamber
