#include "chamber/prompting.hpp"

#include <algorithm>
#include <cctype>

#include "chamber/default_templates.hpp"
#include "chamber/errors.hpp"

namespace chamber {

std::string_view to_string(PromptPhase phase) {
  switch (phase) {
    case PromptPhase::profile_gen: return "profile_gen";
    case PromptPhase::opening: return "opening";
    case PromptPhase::turn: return "turn";
    case PromptPhase::interpretation: return "interpretation";
    case PromptPhase::reflection: return "reflection";
  }
  return "turn";
}

PromptPhase parse_prompt_phase(std::string_view text) {
  for (auto phase : {PromptPhase::profile_gen, PromptPhase::opening, PromptPhase::turn, PromptPhase::interpretation,
                     PromptPhase::reflection}) {
    if (to_string(phase) == text) return phase;
  }
  throw ValidationError("phase", "unknown prompt phase \"" + std::string(text) + "\"");
}

namespace {

// Template files end with a newline; the template itself does not.
std::string strip_final_newline(std::string text) {
  if (!text.empty() && text.back() == '\n') text.pop_back();
  if (!text.empty() && text.back() == '\r') text.pop_back();
  return text;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  for (const auto& [name, text] : detail::embedded_templates()) {
    t.templates_.emplace(name, strip_final_newline(text));
  }
  return t;
}

PromptTemplates PromptTemplates::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("template directory not found: " + dir.string());
  }
  auto t = defaults();
  for (const char* name : kNames) {
    auto path = dir / (std::string(name) + ".txt");
    if (std::filesystem::exists(path)) {
      t.set(name, strip_final_newline(read_text_file(path)));
    }
  }
  return t;
}

const std::string& PromptTemplates::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw TemplateError("no template named \"" + std::string(name) + "\"");
  }
  return it->second;
}

void PromptTemplates::set(std::string name, std::string text) {
  templates_.insert_or_assign(std::move(name), std::move(text));
}

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw TemplateError("unterminated placeholder at offset " + std::to_string(open));
    }
    auto name = tmpl.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end()) {
      throw TemplateError("unknown placeholder {{" + std::string(name) + "}}");
    }
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

SpeakerNames speaker_names(const Roster& roster) {
  SpeakerNames names;
  for (const auto& m : roster.members()) {
    names.emplace(m.agent_id, m.name);
  }
  return names;
}

std::string render_context(std::span<const MemoryEntry> entries, const SpeakerNames& names) {
  if (entries.empty()) {
    return "(nothing yet)";
  }
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += '\n';
    out += 't';
    out += std::to_string(e.timestep);
    out += ' ';
    if (e.speaker) {
      auto it = names.find(*e.speaker);
      out += it == names.end() ? *e.speaker : it->second;
    } else {
      out += to_string(e.kind);
    }
    out += ": ";
    out += e.content;
  }
  return out;
}

PromptBuilder::PromptBuilder(PromptTemplates templates, std::int64_t seed, SpeakerNames names)
    : templates_(std::move(templates)), seed_(seed), names_(std::move(names)) {}

std::string PromptBuilder::persona(const AgentProfile& p) const {
  return render_template(templates_.get("persona"),
                         {{"name", p.name},
                          {"party", std::string(to_string(p.party))},
                          {"party_name", std::string(party_display_name(p.party))},
                          {"state", p.state},
                          {"years_of_service", std::to_string(p.years_of_service)},
                          {"traits", join(p.traits, ", ")},
                          {"policies", p.policies}});
}

DecodingParams PromptBuilder::debate_params(const DecodingDefaults& decoding) const {
  return {decoding.debate_temperature, seed_, decoding.max_tokens};
}

PromptBundle PromptBuilder::opening(const AgentProfile& p, const Scenario& sc) const {
  return {persona(p), render_template(templates_.get("opening"), {{"name", p.name}, {"topic", sc.topic_prompt}}),
          PromptPhase::opening, debate_params(sc.decoding)};
}

PromptBundle PromptBuilder::turn(const AgentProfile& p, const Scenario& sc, std::span<const MemoryEntry> context,
                                 int cycle) const {
  auto user = render_template(templates_.get("turn"), {{"name", p.name},
                                                       {"topic", sc.topic_prompt},
                                                       {"cycle", std::to_string(cycle)},
                                                       {"cycles", std::to_string(sc.cycles)},
                                                       {"context", render_context(context, names_)}});
  return {persona(p), std::move(user), PromptPhase::turn, debate_params(sc.decoding)};
}

PromptBundle PromptBuilder::interpretation(const AgentProfile& p, std::span<const MemoryEntry> recent,
                                           const DecodingDefaults& decoding) const {
  auto user = render_template(templates_.get("interpretation"),
                              {{"name", p.name}, {"context", render_context(recent, names_)}});
  return {persona(p), std::move(user), PromptPhase::interpretation,
          DecodingParams{decoding.interpretation_temperature, seed_, decoding.max_tokens}};
}

PromptBundle PromptBuilder::reflection(const AgentProfile& p, const Scenario& sc,
                                       std::span<const MemoryEntry> history, std::string_view question) const {
  if (question.empty()) {
    throw ValidationError("question", "must be non-empty");
  }
  auto user = render_template(templates_.get("reflection"), {{"name", p.name},
                                                             {"topic", sc.topic_prompt},
                                                             {"context", render_context(history, names_)},
                                                             {"question", std::string(question)}});
  return {persona(p), std::move(user), PromptPhase::reflection, debate_params(sc.decoding)};
}

PromptBundle PromptBuilder::profile_generation(std::string_view name, Party party,
                                               const DecodingDefaults& decoding) const {
  TemplateVars vars{{"name", std::string(name)},
                    {"party", std::string(to_string(party))},
                    {"party_name", std::string(party_display_name(party))}};
  return {render_template(templates_.get("profile_gen_system"), vars),
          render_template(templates_.get("profile_gen"), vars), PromptPhase::profile_gen,
          debate_params(decoding)};
}

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(text.begin(), text.end(), is_space);
  auto end = std::find_if_not(text.rbegin(), std::string_view::reverse_iterator(begin), is_space).base();
  return std::string(begin, end);
}

namespace {

bool equals_ignore_case(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

}  // namespace

TurnAction parse_turn_response(std::string_view raw, const Roster& roster) {
  auto text = trim(raw);
  if (text.empty()) {
    throw EmptyResponseError("model reply is empty");
  }
  if (equals_ignore_case(text, kPassSentinel)) {
    return {TurnKind::pass, "", std::nullopt};
  }
  TurnAction action{TurnKind::speak, text, std::nullopt};
  if (text.front() == '@') {
    auto colon = text.find(':');
    if (colon != std::string::npos) {
      if (const auto* target = roster.find_by_name(trim(std::string_view(text).substr(1, colon - 1)))) {
        auto rest = trim(std::string_view(text).substr(colon + 1));
        if (rest.empty()) {
          throw EmptyResponseError("reply addressed to " + target->name + " has no content");
        }
        action.addressed_to = target->agent_id;
        action.content = std::move(rest);
      }
    }
  }
  return action;
}

std::string render_turn_reply(const TurnAction& action, const Roster& roster) {
  if (action.action == TurnKind::pass) {
    return std::string(kPassSentinel);
  }
  if (action.addressed_to) {
    return "@" + roster.at(*action.addressed_to).name + ": " + action.content;
  }
  return action.content;
}

}  // namespace chamber
