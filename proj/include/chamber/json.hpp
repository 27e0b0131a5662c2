#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace chamber {

// Field order in every written document follows insertion order.
using Json = nlohmann::ordered_json;

// Throws ParseError (malformed text) or IoError (unreadable file).
Json parse_json(std::string_view text, std::string_view origin);
Json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename so readers never see a torn file.
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Typed field access that reports schema problems as ValidationError naming the field.
const Json& require_field(const Json& object, const char* field);
std::string require_string(const Json& object, const char* field);
long long require_integer(const Json& object, const char* field);
double require_number(const Json& object, const char* field);

}  // namespace chamber
