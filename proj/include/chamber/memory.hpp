#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chamber/json.hpp"

namespace chamber {

using Timestep = std::int64_t;

enum class MemoryKind { scenario_prompt, observation, interpretation, perturbation, reflection };

std::string_view to_string(MemoryKind kind);
MemoryKind parse_memory_kind(std::string_view text);

struct MemoryEntry {
  Timestep timestep = 0;
  MemoryKind kind = MemoryKind::observation;
  std::optional<std::string> speaker;  // agent_id that produced the content
  std::string content;
  std::string scenario_id;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

// Append-only list of perceived memories owned by one agent. Entries are
// strictly increasing by timestep; nothing is ever mutated or removed.
class MemoryStream {
 public:
  explicit MemoryStream(std::string owner) : owner_(std::move(owner)) {}

  const std::string& owner() const noexcept { return owner_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::optional<Timestep> last_timestep() const noexcept;

  // Throws TimestepOrderError when entry.timestep <= last timestep, and
  // ValidationError for empty content, negative timesteps, or an
  // interpretation whose speaker is not the owner.
  void append(MemoryEntry entry);

  // The most recent min(k, available) entries strictly before `now`, oldest first.
  std::span<const MemoryEntry> context_window(std::size_t k, Timestep now) const noexcept;

  std::span<const MemoryEntry> full_history() const noexcept { return entries_; }

  friend bool operator==(const MemoryStream&, const MemoryStream&) = default;

 private:
  std::string owner_;
  std::vector<MemoryEntry> entries_;
};

Json memory_entry_to_json(const MemoryEntry& entry);
MemoryEntry memory_entry_from_json(const Json& json);

// Memory dump: {"owner", "entries": [{"timestep","kind","speaker","content","scenario_id"}]}.
Json stream_to_json(const MemoryStream& stream);
MemoryStream stream_from_json(const Json& json);

void save_stream(const MemoryStream& stream, const std::filesystem::path& path);
MemoryStream load_stream(const std::filesystem::path& path);

}  // namespace chamber
