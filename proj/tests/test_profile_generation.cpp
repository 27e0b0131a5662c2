#include <gtest/gtest.h>

#include "chamber/profile_generation.hpp"
#include "chamber/scripted_backend.hpp"
#include "test_support.hpp"

using namespace chamber;

namespace {

constexpr const char* kRubioReply =
    "POLICIES: My policies are aimed at advancing economic growth and strengthening America's role in the world.\n"
    "TRAITS: hawkish on foreign policy, articulate, strategic\n";

}  // namespace

TEST(ExtractBio, RubioExample) {
  auto bio = extract_bio(kRubioReply);
  EXPECT_EQ(bio.policies,
            "My policies are aimed at advancing economic growth and strengthening America's role in the world.");
  EXPECT_EQ(bio.traits, (std::vector<std::string>{"hawkish on foreign policy", "articulate", "strategic"}));
}

TEST(ExtractBio, MultiLinePoliciesAndCaseInsensitiveTags) {
  auto bio = extract_bio("Sure.\npolicies: First line\ncontinues here.\n\nTraits: calm, direct.\n");
  EXPECT_EQ(bio.policies, "First line continues here.");
  EXPECT_EQ(bio.traits, (std::vector<std::string>{"calm", "direct"}));
}

TEST(ExtractBio, MissingSectionsFail) {
  EXPECT_THROW(extract_bio(""), ExtractionError);
  EXPECT_THROW(extract_bio("I cannot help with that."), ExtractionError);
  EXPECT_THROW(extract_bio("POLICIES: something"), ExtractionError);
  EXPECT_THROW(extract_bio("TRAITS: a, b"), ExtractionError);
  EXPECT_THROW(extract_bio("POLICIES:\nTRAITS: a"), ExtractionError);
  EXPECT_THROW(extract_bio("POLICIES: x\nTRAITS: , ,"), ExtractionError);
}

TEST(GenerateProfile, StructuralFieldsComeFromCaller) {
  ScriptedBackend backend(std::vector<std::string>{kRubioReply});
  ProfileRequest req{"Marco Rubio", Party::R, std::nullopt, "FL", 0};
  auto profile = generate_profile(req, backend);
  EXPECT_EQ(profile.agent_id, "marco_rubio");
  EXPECT_EQ(profile.name, "Marco Rubio");
  EXPECT_EQ(profile.party, Party::R);
  EXPECT_EQ(profile.state, "FL");
  EXPECT_EQ(profile.years_of_service, 0);
  EXPECT_EQ(profile.traits.size(), 3u);
  EXPECT_TRUE(validate_profile(profile).empty());
}

TEST(GenerateProfile, ExplicitAgentIdAndRouting) {
  Script script;
  script.add("rubio", PromptPhase::profile_gen, kRubioReply);
  ScriptedBackend backend(script);
  auto profile = generate_profile({"Marco Rubio", Party::R, "rubio", "FL", 13}, backend);
  EXPECT_EQ(profile.agent_id, "rubio");
  EXPECT_EQ(profile.years_of_service, 13);
  EXPECT_EQ(backend.remaining(), 0u);
}

TEST(GenerateProfile, UnusableReplyIsExtractionError) {
  ScriptedBackend backend(std::vector<std::string>{"As an assistant I won't."});
  EXPECT_THROW(generate_profile({"Marco Rubio", Party::R, std::nullopt, "FL", 0}, backend), ExtractionError);
}

TEST(ProfileRequests, FromSeedFixture) {
  auto reqs = profile_requests_from_json(read_json_file(chamber::testing::fixture("profile_seeds.json")));
  ASSERT_FALSE(reqs.empty());
  for (const auto& r : reqs) {
    EXPECT_FALSE(r.name.empty());
  }
  EXPECT_THROW(profile_requests_from_json(Json{{"members", Json::array()}}), ValidationError);
  EXPECT_THROW(profile_requests_from_json(Json::object()), ValidationError);
}
