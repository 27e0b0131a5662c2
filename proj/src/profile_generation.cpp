#include "chamber/profile_generation.hpp"

#include <cctype>
#include <sstream>

namespace chamber {

namespace {

// Returns the text after `tag` when `line` starts with it (case-insensitive).
std::optional<std::string> after_tag(std::string_view line, std::string_view tag) {
  if (line.size() < tag.size()) return std::nullopt;
  for (std::size_t i = 0; i < tag.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(line[i])) != tag[i]) return std::nullopt;
  }
  return trim(line.substr(tag.size()));
}

}  // namespace

ExtractedBio extract_bio(std::string_view completion) {
  ExtractedBio bio;
  bool have_policies = false;
  bool have_traits = false;
  bool in_policies = false;

  std::istringstream lines{std::string(completion)};
  std::string raw;
  while (std::getline(lines, raw)) {
    auto line = trim(raw);
    if (auto rest = after_tag(line, "POLICIES:")) {
      bio.policies = *rest;
      have_policies = true;
      in_policies = true;
    } else if (auto rest = after_tag(line, "TRAITS:")) {
      in_policies = false;
      have_traits = true;
      std::istringstream items(*rest);
      std::string item;
      while (std::getline(items, item, ',')) {
        auto trait = trim(item);
        while (!trait.empty() && trait.back() == '.') trait.pop_back();
        if (!trait.empty()) bio.traits.push_back(std::move(trait));
      }
    } else if (in_policies && !line.empty()) {
      if (!bio.policies.empty()) bio.policies += ' ';
      bio.policies += line;
    }
  }
  if (!have_policies || bio.policies.empty()) {
    throw ExtractionError("completion has no POLICIES: paragraph");
  }
  if (!have_traits || bio.traits.empty()) {
    throw ExtractionError("completion has no TRAITS: line");
  }
  return bio;
}

AgentProfile generate_profile(const ProfileRequest& request, ModelBackend& backend, const PromptBuilder& prompts,
                              const std::string& model) {
  AgentProfile profile;
  profile.agent_id = request.agent_id.value_or(slugify(request.name));
  profile.name = request.name;
  profile.party = request.party;
  profile.state = request.state;
  profile.years_of_service = request.years_of_service;

  auto bundle = prompts.profile_generation(request.name, request.party);
  auto result = backend.complete(make_request(bundle, model, {profile.agent_id, std::string(to_string(bundle.phase))}));
  auto bio = extract_bio(result.text);
  profile.policies = std::move(bio.policies);
  profile.traits = std::move(bio.traits);
  return profile;
}

std::vector<ProfileRequest> profile_requests_from_json(const Json& j) {
  const auto& members = require_field(j, "members");
  if (!members.is_array() || members.empty()) {
    throw ValidationError("members", "expected a non-empty array");
  }
  std::vector<ProfileRequest> out;
  for (const auto& m : members) {
    ProfileRequest r;
    r.name = require_string(m, "name");
    r.party = parse_party(require_string(m, "party"));
    if (m.contains("agent_id")) r.agent_id = require_string(m, "agent_id");
    if (m.contains("state")) r.state = require_string(m, "state");
    if (m.contains("years_of_service")) r.years_of_service = static_cast<int>(require_integer(m, "years_of_service"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace chamber
