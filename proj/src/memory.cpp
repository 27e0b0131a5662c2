#include "chamber/memory.hpp"

#include <algorithm>

#include "chamber/errors.hpp"

namespace chamber {

std::string_view to_string(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::scenario_prompt: return "scenario_prompt";
    case MemoryKind::observation: return "observation";
    case MemoryKind::interpretation: return "interpretation";
    case MemoryKind::perturbation: return "perturbation";
    case MemoryKind::reflection: return "reflection";
  }
  return "observation";
}

MemoryKind parse_memory_kind(std::string_view text) {
  for (auto kind : {MemoryKind::scenario_prompt, MemoryKind::observation, MemoryKind::interpretation,
                    MemoryKind::perturbation, MemoryKind::reflection}) {
    if (to_string(kind) == text) return kind;
  }
  throw ValidationError("kind", "unknown memory kind \"" + std::string(text) + "\"");
}

std::optional<Timestep> MemoryStream::last_timestep() const noexcept {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().timestep;
}

void MemoryStream::append(MemoryEntry entry) {
  if (entry.timestep < 0) {
    throw ValidationError("timestep", "must be >= 0");
  }
  if (entry.content.empty()) {
    throw ValidationError("content", "must be non-empty");
  }
  if (entry.kind == MemoryKind::interpretation && entry.speaker != owner_) {
    throw ValidationError("speaker", "interpretation entries must be spoken by the stream owner \"" + owner_ + "\"");
  }
  if (!entries_.empty() && entry.timestep <= entries_.back().timestep) {
    throw TimestepOrderError("entry at t=" + std::to_string(entry.timestep) + " does not follow t=" +
                             std::to_string(entries_.back().timestep) + " in stream of \"" + owner_ + "\"");
  }
  entries_.push_back(std::move(entry));
}

std::span<const MemoryEntry> MemoryStream::context_window(std::size_t k, Timestep now) const noexcept {
  auto end = std::lower_bound(entries_.begin(), entries_.end(), now,
                              [](const MemoryEntry& e, Timestep t) { return e.timestep < t; });
  auto available = static_cast<std::size_t>(end - entries_.begin());
  auto take = std::min(k, available);
  return {entries_.data() + (available - take), take};
}

Json memory_entry_to_json(const MemoryEntry& e) {
  Json j;
  j["timestep"] = e.timestep;
  j["kind"] = std::string(to_string(e.kind));
  j["speaker"] = e.speaker ? Json(*e.speaker) : Json(nullptr);
  j["content"] = e.content;
  j["scenario_id"] = e.scenario_id;
  return j;
}

MemoryEntry memory_entry_from_json(const Json& j) {
  MemoryEntry e;
  e.timestep = require_integer(j, "timestep");
  e.kind = parse_memory_kind(require_string(j, "kind"));
  const auto& speaker = require_field(j, "speaker");
  if (speaker.is_string()) {
    e.speaker = speaker.get<std::string>();
  } else if (!speaker.is_null()) {
    throw ValidationError("speaker", "expected a string or null");
  }
  e.content = require_string(j, "content");
  e.scenario_id = require_string(j, "scenario_id");
  return e;
}

Json stream_to_json(const MemoryStream& s) {
  Json entries = Json::array();
  for (const auto& e : s.full_history()) {
    entries.push_back(memory_entry_to_json(e));
  }
  Json j;
  j["owner"] = s.owner();
  j["entries"] = std::move(entries);
  return j;
}

MemoryStream stream_from_json(const Json& j) {
  MemoryStream s(require_string(j, "owner"));
  const auto& entries = require_field(j, "entries");
  if (!entries.is_array()) {
    throw ValidationError("entries", "expected an array");
  }
  for (const auto& e : entries) {
    s.append(memory_entry_from_json(e));
  }
  return s;
}

void save_stream(const MemoryStream& stream, const std::filesystem::path& path) {
  write_text_file(path, stream_to_json(stream).dump(2) + "\n");
}

MemoryStream load_stream(const std::filesystem::path& path) {
  return stream_from_json(read_json_file(path));
}

}  // namespace chamber
