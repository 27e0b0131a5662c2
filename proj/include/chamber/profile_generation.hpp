#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/backend.hpp"
#include "chamber/openai_backend.hpp"
#include "chamber/profiles.hpp"
#include "chamber/prompting.hpp"

namespace chamber {

// Structural fields supplied by the caller; never model-generated.
struct ProfileRequest {
  std::string name;
  Party party = Party::I;
  std::optional<std::string> agent_id;  // defaults to slugify(name)
  std::string state;
  int years_of_service = 0;
};

struct ExtractedBio {
  std::string policies;
  std::vector<std::string> traits;
};

// Parses the required reply format:
//   POLICIES: <paragraph, may continue on following lines>
//   TRAITS: <comma-separated traits>
// Throws ExtractionError when either section is missing or empty.
ExtractedBio extract_bio(std::string_view completion);

// Fills policies and traits from one backend completion.
AgentProfile generate_profile(const ProfileRequest& request, ModelBackend& backend,
                              const PromptBuilder& prompts = PromptBuilder(), const std::string& model = kDefaultModel);

// Seed document for gen-profiles: {"members": [{"name","party","state"?,"years_of_service"?,"agent_id"?}]}.
std::vector<ProfileRequest> profile_requests_from_json(const Json& json);

}  // namespace chamber
