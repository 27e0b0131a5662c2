#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "chamber/memory.hpp"
#include "chamber/profiles.hpp"
#include "chamber/scenario.hpp"

namespace chamber {

enum class PromptPhase { profile_gen, opening, turn, interpretation, reflection };

std::string_view to_string(PromptPhase phase);
PromptPhase parse_prompt_phase(std::string_view text);

struct DecodingParams {
  double temperature = 0.7;
  std::int64_t seed = 0;
  int max_tokens = 400;

  friend bool operator==(const DecodingParams&, const DecodingParams&) = default;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  PromptPhase phase = PromptPhase::turn;
  DecodingParams params;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Named prompt templates with {{placeholder}} slots. The defaults are the
// files under templates/ compiled into the library.
class PromptTemplates {
 public:
  static constexpr const char* kNames[] = {"persona",     "opening",    "turn",
                                           "interpretation", "reflection", "profile_gen_system",
                                           "profile_gen"};

  static PromptTemplates defaults();

  // Starts from the defaults and replaces every template that has a
  // <name>.txt file in `dir`. Throws IoError if `dir` is not a directory.
  static PromptTemplates from_directory(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;  // TemplateError if unknown
  void set(std::string name, std::string text);

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

using TemplateVars = std::map<std::string, std::string, std::less<>>;

// Substitutes every {{name}}. Unknown or unterminated placeholders throw TemplateError.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

// Display names for speaker ids in rendered context; ids without an entry render as-is.
using SpeakerNames = std::map<std::string, std::string, std::less<>>;

SpeakerNames speaker_names(const Roster& roster);

// "t<timestep> <speaker-or-kind>: <content>", one line per entry.
std::string render_context(std::span<const MemoryEntry> entries, const SpeakerNames& names = {});

// Builds every prompt the simulation issues. All builders are pure: identical
// inputs give byte-identical bundles.
class PromptBuilder {
 public:
  explicit PromptBuilder(PromptTemplates templates = PromptTemplates::defaults(), std::int64_t seed = 0,
                         SpeakerNames names = {});

  PromptBundle opening(const AgentProfile& profile, const Scenario& scenario) const;
  PromptBundle turn(const AgentProfile& profile, const Scenario& scenario, std::span<const MemoryEntry> context,
                    int cycle) const;
  PromptBundle interpretation(const AgentProfile& profile, std::span<const MemoryEntry> recent,
                              const DecodingDefaults& decoding = {}) const;
  PromptBundle reflection(const AgentProfile& profile, const Scenario& scenario,
                          std::span<const MemoryEntry> history, std::string_view question) const;
  PromptBundle profile_generation(std::string_view name, Party party, const DecodingDefaults& decoding = {}) const;

  std::string persona(const AgentProfile& profile) const;

 private:
  DecodingParams debate_params(const DecodingDefaults& decoding) const;

  PromptTemplates templates_;
  std::int64_t seed_;
  SpeakerNames names_;
};

enum class TurnKind { speak, pass };

struct TurnAction {
  TurnKind action = TurnKind::pass;
  std::string content;                      // empty iff pass
  std::optional<std::string> addressed_to;  // agent_id

  friend bool operator==(const TurnAction&, const TurnAction&) = default;
};

inline constexpr std::string_view kPassSentinel = "PASS";

// "PASS" (any case, surrounding whitespace ignored) is a pass. Otherwise the
// trimmed text is spoken; a leading "@<Name>:" naming a roster member sets
// addressed_to and is stripped. Throws EmptyResponseError on blank replies.
TurnAction parse_turn_response(std::string_view raw, const Roster& roster);

// The reply a model would give for `action` under the instructed format.
std::string render_turn_reply(const TurnAction& action, const Roster& roster);

std::string trim(std::string_view text);

}  // namespace chamber
