#include <cctype>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "chamber/profiles.hpp"
#include "test_support.hpp"

using namespace chamber;
using chamber::testing::fixture;
using chamber::testing::TempDir;

namespace {

AgentProfile rubio() {
  return {"rubio", "Marco Rubio", Party::R, "FL", 13, {"hawkish on foreign policy", "articulate"},
          "My policies are aimed at advancing economic growth and strengthening America's role in the world."};
}

bool has_violation(const std::vector<Violation>& v, const std::string& field) {
  for (const auto& e : v) {
    if (e.field == field) return true;
  }
  return false;
}

}  // namespace

TEST(LoadRoster, BundledCommitteeFixture) {
  const auto roster = load_roster(fixture("roster_intel_committee.json"));
  ASSERT_EQ(roster.size(), 6u);
  const std::vector<std::pair<std::string, Party>> expected{
      {"Mark Warner", Party::D}, {"Marco Rubio", Party::R}, {"Susan Collins", Party::R},
      {"John Cornyn", Party::R}, {"Ron Wyden", Party::D},   {"Martin Heinrich", Party::D}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(roster.members()[i].name, expected[i].first);
    EXPECT_EQ(roster.members()[i].party, expected[i].second);
  }
  EXPECT_EQ(roster.at("rubio").policies,
            "My policies are aimed at advancing economic growth and strengthening America's role in the world.");
}

TEST(LoadRoster, EmptyMembersIsValidationError) {
  EXPECT_THROW(load_roster(fixture("malformed/roster_empty_members.json")), ValidationError);
}

TEST(LoadRoster, DuplicateAgentIdNamesTheId) {
  try {
    load_roster(fixture("malformed/roster_duplicate_agent_id.json"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "agent_id");
    EXPECT_NE(std::string(e.what()).find("\"warner\""), std::string::npos) << e.what();
  }
}

TEST(LoadRoster, MalformedJsonIsParseError) {
  TempDir dir;
  std::ofstream(dir / "bad.json") << "{\"members\": [";
  EXPECT_THROW(load_roster(dir / "bad.json"), ParseError);
}

TEST(LoadRoster, MissingFileIsIoError) {
  EXPECT_THROW(load_roster("/nonexistent/roster.json"), IoError);
}

TEST(LoadRoster, UnknownPartyIsValidationError) {
  auto j = roster_to_json(Roster({rubio(), chamber::testing::make_profile("x", "X Y")}));
  j["members"][0]["party"] = "Whig";
  try {
    roster_from_json(j);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "party");
  }
}

TEST(ValidateProfile, WellFormedRubio) {
  EXPECT_TRUE(validate_profile(rubio()).empty());
}

TEST(ValidateProfile, NegativeYears) {
  auto p = rubio();
  p.years_of_service = -1;
  EXPECT_TRUE(has_violation(validate_profile(p), "years_of_service"));
}

TEST(ValidateProfile, EmptyTraits) {
  auto p = rubio();
  p.traits.clear();
  EXPECT_TRUE(has_violation(validate_profile(p), "traits"));
}

TEST(ValidateProfile, OtherInvariants) {
  auto p = rubio();
  p.policies = "";
  p.state = "Florida";
  p.agent_id = "";
  const auto v = validate_profile(p);
  EXPECT_TRUE(has_violation(v, "policies"));
  EXPECT_TRUE(has_violation(v, "state"));
  EXPECT_TRUE(has_violation(v, "agent_id"));
}

TEST(Roster, LookupAndOrder) {
  Roster r({rubio(), chamber::testing::make_profile("wyden", "Ron Wyden")});
  EXPECT_EQ(r.index_of("wyden"), 1u);
  EXPECT_EQ(r.find_by_name("Marco Rubio")->agent_id, "rubio");
  EXPECT_EQ(r.find("nobody"), nullptr);
  EXPECT_THROW(r.at("nobody"), UnknownAgentError);
}

TEST(Roster, SingleMemberRejected) {
  EXPECT_THROW(Roster({rubio()}), ValidationError);
}

TEST(Slugify, Names) {
  EXPECT_EQ(slugify("Marco Rubio"), "marco_rubio");
  EXPECT_EQ(slugify("  Ron  Wyden "), "ron_wyden");
}

// Randomized profiles: validate_profile accepts exactly those satisfying the
// invariants, and the save/load round-trip is the identity.
TEST(ProfileProperties, ValidationAgreesWithInvariantsAndRoundTrips) {
  std::mt19937_64 rng(20240601);
  auto coin = [&](int one_in) { return std::uniform_int_distribution<int>(0, one_in - 1)(rng) == 0; };
  const char* states[] = {"OR", "TX", "Fl", "", "NYC", "VA"};
  TempDir dir;
  for (int i = 0; i < 300; ++i) {
    AgentProfile p;
    p.agent_id = coin(10) ? "" : "id" + std::to_string(i);
    p.name = coin(10) ? "" : "Name " + std::to_string(i);
    p.party = static_cast<Party>(i % 3);
    p.state = states[std::uniform_int_distribution<int>(0, 5)(rng)];
    p.years_of_service = std::uniform_int_distribution<int>(-3, 40)(rng);
    const int traits = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int t = 0; t < traits; ++t) p.traits.push_back(coin(8) ? " " : "trait " + std::to_string(t));
    p.policies = coin(8) ? "" : "Policy paragraph " + std::to_string(i);

    const bool state_ok = p.state.size() == 2 && std::isupper(static_cast<unsigned char>(p.state[0])) &&
                          std::isupper(static_cast<unsigned char>(p.state[1]));
    bool traits_ok = !p.traits.empty();
    for (const auto& t : p.traits) traits_ok = traits_ok && t != " ";
    const bool expected_ok = !p.agent_id.empty() && !p.name.empty() && state_ok && p.years_of_service >= 0 &&
                             traits_ok && !p.policies.empty();
    EXPECT_EQ(validate_profile(p).empty(), expected_ok) << i;

    if (expected_ok) {
      auto other = chamber::testing::make_profile("other" + std::to_string(i), "Other");
      Roster roster({p, other});
      save_roster(roster, dir / "r.json");
      EXPECT_EQ(load_roster(dir / "r.json"), roster);
    }
  }
}
