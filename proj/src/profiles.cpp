#include "chamber/profiles.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "chamber/errors.hpp"

namespace chamber {

std::string_view to_string(Party party) {
  switch (party) {
    case Party::D: return "D";
    case Party::R: return "R";
    case Party::I: return "I";
  }
  return "I";
}

std::string_view party_display_name(Party party) {
  switch (party) {
    case Party::D: return "Democrat";
    case Party::R: return "Republican";
    case Party::I: return "Independent";
  }
  return "Independent";
}

Party parse_party(std::string_view text) {
  if (text == "D") return Party::D;
  if (text == "R") return Party::R;
  if (text == "I") return Party::I;
  throw ValidationError("party", "expected one of D, R, I; got \"" + std::string(text) + "\"");
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<Violation> validate_profile(const AgentProfile& p) {
  std::vector<Violation> out;
  if (is_blank(p.agent_id)) {
    out.push_back({"agent_id", "must be non-empty"});
  }
  if (is_blank(p.name)) {
    out.push_back({"name", "must be non-empty"});
  }
  if (p.state.size() != 2 ||
      !std::all_of(p.state.begin(), p.state.end(), [](unsigned char c) { return std::isupper(c); })) {
    out.push_back({"state", "must be a two-letter uppercase code"});
  }
  if (p.years_of_service < 0) {
    out.push_back({"years_of_service", "must be >= 0"});
  }
  if (p.traits.empty()) {
    out.push_back({"traits", "must list at least one trait"});
  } else if (std::any_of(p.traits.begin(), p.traits.end(), [](const auto& t) { return is_blank(t); })) {
    out.push_back({"traits", "entries must be non-empty"});
  }
  if (is_blank(p.policies)) {
    out.push_back({"policies", "must be non-empty"});
  }
  return out;
}

Roster::Roster(std::vector<AgentProfile> members) : members_(std::move(members)) {
  if (members_.size() < kMinMembers) {
    throw ValidationError("members", "roster needs at least " + std::to_string(kMinMembers) +
                                         " members, got " + std::to_string(members_.size()));
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const auto& m = members_[i];
    auto violations = validate_profile(m);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw ValidationError(v.field, v.message + " (member " + std::to_string(i) + ")");
    }
    if (!seen.insert(m.agent_id).second) {
      throw ValidationError("agent_id", "duplicate agent_id \"" + m.agent_id + "\"");
    }
  }
}

const AgentProfile* Roster::find(std::string_view agent_id) const noexcept {
  auto it = std::find_if(members_.begin(), members_.end(),
                         [&](const AgentProfile& p) { return p.agent_id == agent_id; });
  return it == members_.end() ? nullptr : &*it;
}

const AgentProfile* Roster::find_by_name(std::string_view name) const noexcept {
  auto it = std::find_if(members_.begin(), members_.end(),
                         [&](const AgentProfile& p) { return p.name == name; });
  return it == members_.end() ? nullptr : &*it;
}

const AgentProfile& Roster::at(std::string_view agent_id) const {
  if (const auto* p = find(agent_id)) {
    return *p;
  }
  throw UnknownAgentError("unknown agent_id \"" + std::string(agent_id) + "\"");
}

std::optional<std::size_t> Roster::index_of(std::string_view agent_id) const noexcept {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i].agent_id == agent_id) return i;
  }
  return std::nullopt;
}

Json profile_to_json(const AgentProfile& p) {
  Json j;
  j["agent_id"] = p.agent_id;
  j["name"] = p.name;
  j["party"] = std::string(to_string(p.party));
  j["state"] = p.state;
  j["years_of_service"] = p.years_of_service;
  j["traits"] = p.traits;
  j["policies"] = p.policies;
  return j;
}

AgentProfile profile_from_json(const Json& j) {
  AgentProfile p;
  p.agent_id = require_string(j, "agent_id");
  p.name = require_string(j, "name");
  p.party = parse_party(require_string(j, "party"));
  p.state = require_string(j, "state");
  auto years = require_integer(j, "years_of_service");
  if (years < 0 || years > 200) {
    throw ValidationError("years_of_service", "out of range: " + std::to_string(years));
  }
  p.years_of_service = static_cast<int>(years);
  const auto& traits = require_field(j, "traits");
  if (!traits.is_array()) {
    throw ValidationError("traits", "expected an array of strings");
  }
  for (const auto& t : traits) {
    if (!t.is_string()) {
      throw ValidationError("traits", "expected an array of strings");
    }
    p.traits.push_back(t.get<std::string>());
  }
  p.policies = require_string(j, "policies");
  return p;
}

Json roster_to_json(const Roster& roster) {
  Json members = Json::array();
  for (const auto& m : roster.members()) {
    members.push_back(profile_to_json(m));
  }
  Json j;
  j["members"] = std::move(members);
  return j;
}

Roster roster_from_json(const Json& j) {
  const auto& members = require_field(j, "members");
  if (!members.is_array()) {
    throw ValidationError("members", "expected an array");
  }
  std::vector<AgentProfile> profiles;
  profiles.reserve(members.size());
  for (const auto& m : members) {
    profiles.push_back(profile_from_json(m));
  }
  return Roster(std::move(profiles));
}

Roster load_roster(const std::filesystem::path& path) {
  return roster_from_json(read_json_file(path));
}

void save_roster(const Roster& roster, const std::filesystem::path& path) {
  write_text_file(path, roster_to_json(roster).dump(2) + "\n");
}

std::string slugify(std::string_view name) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      out.push_back(static_cast<char>(std::tolower(c)));
      pending_sep = false;
    } else {
      pending_sep = true;
    }
  }
  return out;
}

}  // namespace chamber
