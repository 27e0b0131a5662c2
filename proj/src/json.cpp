#include "chamber/json.hpp"

#include <fstream>
#include <sstream>

#include "chamber/errors.hpp"

namespace chamber {

Json parse_json(std::string_view text, std::string_view origin) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(origin) + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("cannot read " + path.string());
  }
  return buffer.str();
}

Json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write " + tmp.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
      throw IoError("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

const Json& require_field(const Json& object, const char* field) {
  if (!object.is_object()) {
    throw ValidationError("", "expected a JSON object");
  }
  auto it = object.find(field);
  if (it == object.end()) {
    throw ValidationError(field, "missing");
  }
  return *it;
}

std::string require_string(const Json& object, const char* field) {
  const auto& value = require_field(object, field);
  if (!value.is_string()) {
    throw ValidationError(field, "expected a string");
  }
  return value.get<std::string>();
}

long long require_integer(const Json& object, const char* field) {
  const auto& value = require_field(object, field);
  if (!value.is_number_integer()) {
    throw ValidationError(field, "expected an integer");
  }
  return value.get<long long>();
}

double require_number(const Json& object, const char* field) {
  const auto& value = require_field(object, field);
  if (!value.is_number()) {
    throw ValidationError(field, "expected a number");
  }
  return value.get<double>();
}

}  // namespace chamber
