#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/json.hpp"

namespace chamber {

enum class Party { D, R, I };

std::string_view to_string(Party party);
std::string_view party_display_name(Party party);  // "Democrat", ...
Party parse_party(std::string_view text);           // ValidationError on anything else

// Persona record conditioning every prompt an agent receives.
struct AgentProfile {
  std::string agent_id;
  std::string name;
  Party party = Party::I;
  std::string state;  // two-letter postal code
  int years_of_service = 0;
  std::vector<std::string> traits;
  std::string policies;

  friend bool operator==(const AgentProfile&, const AgentProfile&) = default;
};

struct Violation {
  std::string field;
  std::string message;
};

// Empty result iff every AgentProfile invariant holds.
std::vector<Violation> validate_profile(const AgentProfile& profile);

// Ordered, validated list of at least two profiles. Order fixes turn order.
class Roster {
 public:
  static constexpr std::size_t kMinMembers = 2;

  // Throws ValidationError naming the field (or the duplicated agent_id).
  explicit Roster(std::vector<AgentProfile> members);

  const std::vector<AgentProfile>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

  const AgentProfile* find(std::string_view agent_id) const noexcept;
  const AgentProfile* find_by_name(std::string_view name) const noexcept;
  // Throws UnknownAgentError.
  const AgentProfile& at(std::string_view agent_id) const;
  std::optional<std::size_t> index_of(std::string_view agent_id) const noexcept;

  friend bool operator==(const Roster&, const Roster&) = default;

 private:
  std::vector<AgentProfile> members_;
};

Json profile_to_json(const AgentProfile& profile);
AgentProfile profile_from_json(const Json& json);

Json roster_to_json(const Roster& roster);
Roster roster_from_json(const Json& json);

// Profile document: {"members": [...]}. Throws ParseError / ValidationError / IoError.
Roster load_roster(const std::filesystem::path& path);
void save_roster(const Roster& roster, const std::filesystem::path& path);

// Lowercase ASCII slug of a display name, e.g. "Marco Rubio" -> "marco_rubio".
std::string slugify(std::string_view name);

}  // namespace chamber
