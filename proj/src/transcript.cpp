#include "chamber/transcript.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "chamber/errors.hpp"

namespace chamber {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::scenario_prompt: return "scenario_prompt";
    case EventKind::opening_statement: return "opening_statement";
    case EventKind::turn: return "turn";
    case EventKind::perturbation: return "perturbation";
    case EventKind::reflection_answer: return "reflection_answer";
  }
  return "turn";
}

EventKind parse_event_kind(std::string_view text) {
  for (auto kind : {EventKind::scenario_prompt, EventKind::opening_statement, EventKind::turn, EventKind::perturbation,
                    EventKind::reflection_answer}) {
    if (to_string(kind) == text) return kind;
  }
  throw ValidationError("kind", "unknown event kind \"" + std::string(text) + "\"");
}

namespace {

constexpr std::string_view kFormat = "chamber-transcript/1";

Json action_to_json(const TurnAction& a) {
  Json j;
  j["action"] = a.action == TurnKind::pass ? "pass" : "speak";
  j["content"] = a.content;
  if (a.addressed_to) j["addressed_to"] = *a.addressed_to;
  return j;
}

TurnAction action_from_json(const Json& j) {
  TurnAction a;
  auto kind = require_string(j, "action");
  if (kind == "pass") {
    a.action = TurnKind::pass;
  } else if (kind == "speak") {
    a.action = TurnKind::speak;
  } else {
    throw ValidationError("action", "expected speak or pass, got \"" + kind + "\"");
  }
  a.content = require_string(j, "content");
  if (j.contains("addressed_to")) a.addressed_to = require_string(j, "addressed_to");
  return a;
}

Json header_to_json(const TranscriptHeader& h) {
  Json j;
  j["format"] = std::string(kFormat);
  j["run_id"] = h.run_id;
  j["scenario_id"] = h.scenario_id;
  j["model"] = h.model;
  j["seed"] = h.seed;
  j["complete"] = h.complete;
  j["operator_events"] = h.operator_events;
  j["roster"] = h.roster ? roster_to_json(*h.roster) : Json(nullptr);
  return j;
}

TranscriptHeader header_from_json(const Json& j) {
  if (require_string(j, "format") != kFormat) {
    throw ValidationError("format", "expected " + std::string(kFormat));
  }
  TranscriptHeader h;
  h.run_id = require_string(j, "run_id");
  h.scenario_id = require_string(j, "scenario_id");
  h.model = require_string(j, "model");
  h.seed = require_integer(j, "seed");
  const auto& complete = require_field(j, "complete");
  if (!complete.is_boolean()) throw ValidationError("complete", "expected a boolean");
  h.complete = complete.get<bool>();
  const auto& ops = require_field(j, "operator_events");
  if (!ops.is_array()) throw ValidationError("operator_events", "expected an array");
  for (const auto& op : ops) {
    if (!op.is_number_integer()) throw ValidationError("operator_events", "expected integers");
    h.operator_events.push_back(op.get<std::int64_t>());
  }
  const auto& roster = require_field(j, "roster");
  if (!roster.is_null()) h.roster = roster_from_json(roster);
  return h;
}

}  // namespace

Json event_to_json(const TranscriptEvent& e) {
  Json j;
  j["index"] = e.index;
  j["timestep"] = e.timestep;
  j["kind"] = std::string(to_string(e.kind));
  if (e.cycle) j["cycle"] = *e.cycle;
  if (e.agent) j["agent"] = *e.agent;
  j["content"] = e.content;
  if (e.action) j["action"] = action_to_json(*e.action);
  if (e.question) j["question"] = *e.question;
  return j;
}

TranscriptEvent event_from_json(const Json& j) {
  TranscriptEvent e;
  e.index = require_integer(j, "index");
  e.timestep = require_integer(j, "timestep");
  e.kind = parse_event_kind(require_string(j, "kind"));
  if (j.contains("cycle")) e.cycle = static_cast<int>(require_integer(j, "cycle"));
  if (j.contains("agent")) e.agent = require_string(j, "agent");
  e.content = require_string(j, "content");
  if (j.contains("action")) e.action = action_from_json(j["action"]);
  if (j.contains("question")) e.question = require_string(j, "question");
  return e;
}

std::string to_jsonl(const Transcript& t) {
  std::string out = header_to_json(t.header).dump();
  out += '\n';
  for (const auto& e : t.events) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

Transcript parse_jsonl(std::string_view text) {
  Transcript t;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto j = parse_json(line, "transcript line " + std::to_string(line_no));
    if (line_no == 1) {
      t.header = header_from_json(j);
    } else {
      t.events.push_back(event_from_json(j));
    }
  }
  if (line_no == 0) {
    throw ParseError("transcript is empty");
  }
  return t;
}

Transcript load_transcript(const std::filesystem::path& path) {
  return parse_jsonl(read_text_file(path));
}

std::string render_text(const Transcript& t) {
  const auto names = t.header.roster ? speaker_names(*t.header.roster) : SpeakerNames{};
  auto name_of = [&](const std::optional<std::string>& id) -> std::string {
    if (!id) return "";
    auto it = names.find(*id);
    return it == names.end() ? *id : it->second;
  };

  std::ostringstream out;
  out << "Run " << t.header.run_id << " | scenario " << t.header.scenario_id << " | model " << t.header.model
      << " | seed " << t.header.seed << (t.header.complete ? "" : " | INCOMPLETE") << "\n";
  if (t.header.roster) {
    out << "Committee:";
    for (const auto& m : t.header.roster->members()) {
      out << " " << m.name << " (" << to_string(m.party) << "-" << m.state << ")"
          << (&m == &t.header.roster->members().back() ? "" : ",");
    }
    out << "\n";
  }
  out << "\n";
  std::optional<int> current_cycle;
  for (const auto& e : t.events) {
    switch (e.kind) {
      case EventKind::scenario_prompt:
        out << "[" << e.index << "] TOPIC\n    " << e.content << "\n\n== Opening statements ==\n";
        break;
      case EventKind::opening_statement:
        out << "[" << e.index << "] " << name_of(e.agent) << ": " << e.content << "\n";
        break;
      case EventKind::turn:
        if (current_cycle != e.cycle) {
          current_cycle = e.cycle;
          out << "\n== Cycle " << e.cycle.value_or(0) << " ==\n";
        }
        out << "[" << e.index << "] " << name_of(e.agent) << ": " << e.content << "\n";
        break;
      case EventKind::perturbation:
        out << "\n[" << e.index << "] PERTURBATION: " << e.content << "\n";
        break;
      case EventKind::reflection_answer:
        out << "\n[" << e.index << "] REFLECTION by " << name_of(e.agent) << "\n    Q: " << e.question.value_or("")
            << "\n    A: " << e.content << "\n";
        break;
    }
  }
  return out.str();
}

namespace {

char token_of(EventKind kind) {
  switch (kind) {
    case EventKind::scenario_prompt: return 'S';
    case EventKind::opening_statement: return 'O';
    case EventKind::turn: return 'T';
    case EventKind::perturbation: return 'P';
    case EventKind::reflection_answer: return 'R';
  }
  return '?';
}

std::string where(const TranscriptEvent& e) {
  return "event " + std::to_string(e.index) + " (" + std::string(to_string(e.kind)) + ")";
}

void check_fields(const TranscriptEvent& e, std::vector<std::string>& out) {
  const bool needs_agent = e.kind == EventKind::opening_statement || e.kind == EventKind::turn ||
                           e.kind == EventKind::reflection_answer;
  if (needs_agent != e.agent.has_value()) {
    out.push_back(where(e) + (needs_agent ? ": missing agent" : ": unexpected agent"));
  }
  if ((e.kind == EventKind::turn) != e.action.has_value()) {
    out.push_back(where(e) + (e.action ? ": unexpected action" : ": missing action"));
  }
  if ((e.kind == EventKind::reflection_answer) != e.question.has_value()) {
    out.push_back(where(e) + (e.question ? ": unexpected question" : ": missing question"));
  }
  if ((e.kind == EventKind::turn || e.kind == EventKind::perturbation) != e.cycle.has_value()) {
    out.push_back(where(e) + (e.cycle ? ": unexpected cycle" : ": missing cycle"));
  }
  if (e.content.empty()) {
    out.push_back(where(e) + ": empty content");
  }
}

}  // namespace

std::vector<std::string> check_grammar(const Transcript& t, const Scenario& sc) {
  std::vector<std::string> out;
  if (!t.header.complete) {
    out.push_back("transcript is marked incomplete");
  }
  if (!t.header.roster) {
    out.push_back("header has no roster snapshot");
    return out;
  }
  const auto& roster = *t.header.roster;
  const auto& members = roster.members();
  const auto reflected = reflected_agents(sc, roster);
  const std::set<std::int64_t> operator_ids(t.header.operator_events.begin(), t.header.operator_events.end());
  if (operator_ids.size() != t.header.operator_events.size()) {
    out.push_back("header: operator_events lists an index twice");
  }
  for (auto id : operator_ids) {
    if (id < 0 || id >= static_cast<std::int64_t>(t.events.size())) {
      out.push_back("header: operator event " + std::to_string(id) + " is not in the transcript");
    }
  }

  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.index != static_cast<std::int64_t>(i)) {
      out.push_back("event at position " + std::to_string(i) + " has index " + std::to_string(e.index));
    }
    if (i > 0 && e.timestep <= t.events[i - 1].timestep) {
      out.push_back(where(e) + ": timestep does not increase");
    }
    check_fields(e, out);
  }

  // Operator events: only perturbations and reflections, only at boundaries.
  std::vector<const TranscriptEvent*> scheduled;
  for (const auto& e : t.events) {
    if (!operator_ids.count(e.index)) {
      scheduled.push_back(&e);
      continue;
    }
    if (e.kind != EventKind::perturbation && e.kind != EventKind::reflection_answer) {
      out.push_back(where(e) + ": operator events must be perturbations or reflections");
      continue;
    }
    const TranscriptEvent* prev = scheduled.empty() ? nullptr : scheduled.back();
    const bool at_boundary =
        prev && ((prev->kind == EventKind::opening_statement && prev->agent == members.back().agent_id) ||
                 (prev->kind == EventKind::turn && prev->agent == members.back().agent_id) ||
                 prev->kind == EventKind::perturbation || prev->kind == EventKind::reflection_answer);
    if (!at_boundary) {
      out.push_back(where(e) + ": operator event is not at a cycle boundary");
    }
  }

  std::string tokens;
  for (const auto* e : scheduled) tokens += token_of(e->kind);
  const auto A = std::to_string(members.size());
  const std::regex shape("^SO{" + A + "}P*(?:T{" + A + "}P*){" + std::to_string(sc.cycles) + "}R{" +
                         std::to_string(reflected.size() * sc.reflection_questions.size()) + "}$");
  if (!std::regex_match(tokens, shape)) {
    out.push_back("event sequence " + tokens + " does not match the grammar for A=" + A +
                  " C=" + std::to_string(sc.cycles) + " Q=" + std::to_string(sc.reflection_questions.size()) +
                  " R=" + std::to_string(reflected.size()));
    return out;
  }

  std::size_t pos = 0;
  auto next = [&]() -> const TranscriptEvent& { return *scheduled[pos++]; };

  if (const auto& s = next(); s.content != sc.topic_prompt) {
    out.push_back(where(s) + ": content is not the scenario topic");
  }
  for (const auto& m : members) {
    if (const auto& e = next(); e.agent != m.agent_id) {
      out.push_back(where(e) + ": expected opening by " + m.agent_id);
    }
  }
  auto check_perturbations = [&](int boundary) {
    std::vector<std::string> expected;
    for (const auto& p : sc.perturbations) {
      if (p.after_cycle == boundary) expected.push_back(p.content);
    }
    std::vector<std::string> actual;
    while (pos < scheduled.size() && scheduled[pos]->kind == EventKind::perturbation) {
      const auto& e = next();
      if (e.cycle != boundary) {
        out.push_back(where(e) + ": perturbation cycle does not match boundary " + std::to_string(boundary));
      }
      actual.push_back(e.content);
    }
    if (actual != expected) {
      out.push_back("perturbations after cycle " + std::to_string(boundary) + " do not match the schedule (" +
                    std::to_string(actual.size()) + " found, " + std::to_string(expected.size()) + " scheduled)");
    }
  };
  check_perturbations(0);
  for (int cycle = 1; cycle <= sc.cycles; ++cycle) {
    for (const auto& m : members) {
      const auto& e = next();
      if (e.agent != m.agent_id) {
        out.push_back(where(e) + ": expected turn by " + m.agent_id);
      }
      if (e.cycle != cycle) {
        out.push_back(where(e) + ": expected cycle " + std::to_string(cycle));
      }
      if (e.action) {
        const auto& a = *e.action;
        if ((a.action == TurnKind::pass) != a.content.empty()) {
          out.push_back(where(e) + ": pass/speak does not agree with action content");
        }
        if (a.addressed_to && !roster.find(*a.addressed_to)) {
          out.push_back(where(e) + ": addressed to unknown agent " + *a.addressed_to);
        } else if (e.content != render_turn_reply(a, roster)) {
          out.push_back(where(e) + ": content does not match its action");
        }
      }
    }
    check_perturbations(cycle);
  }
  for (const auto& agent : reflected) {
    for (const auto& q : sc.reflection_questions) {
      const auto& e = next();
      if (e.agent != agent || e.question != q) {
        out.push_back(where(e) + ": expected reflection by " + agent + " to \"" + q + "\"");
      }
    }
  }
  return out;
}

}  // namespace chamber
