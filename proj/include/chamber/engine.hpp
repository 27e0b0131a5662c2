#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chamber/backend.hpp"
#include "chamber/event_log.hpp"
#include "chamber/memory.hpp"
#include "chamber/openai_backend.hpp"
#include "chamber/profiles.hpp"
#include "chamber/prompting.hpp"
#include "chamber/scenario.hpp"
#include "chamber/transcript.hpp"

namespace chamber {

enum class RunMode { batch, stepped };

std::string_view to_string(RunMode mode);

struct RunConfig {
  RunMode mode = RunMode::batch;
  std::int64_t seed = 0;
  std::string model = kDefaultModel;
  std::string run_id;                // empty: "<scenario_id>-seed<seed>"
  std::filesystem::path output_dir;  // empty: nothing is written
  PromptTemplates templates = PromptTemplates::defaults();
};

enum class RunPhase { not_started, opening, debate, reflection, finished, aborted };

std::string_view to_string(RunPhase phase);

// One run of a scenario: the deliberation state machine.
//
// The run is a fixed plan of units (scenario prompt, one opening statement per
// member, `cycles` rounds of one turn per member in roster order with
// scheduled perturbations at cycle boundaries, then the reflection questions).
// step() executes exactly one unit and emits exactly one event. Every event is
// written into every member's memory stream, except reflection answers, which
// only the answering member remembers. After each turn the speaker also
// stores a one-sentence interpretation of the discussion.
//
// A Session is not thread-safe; serve mode drives it from one command queue.
class Session {
 public:
  // Throws ValidationError for an invalid scenario/roster pairing, before any
  // backend call.
  Session(Scenario scenario, Roster roster, ModelBackend& backend, RunConfig config = {});

  // Executes the next planned unit. Any failure aborts the run: the partial
  // transcript is marked incomplete (and written, if configured) and the
  // error is rethrown. Throws FinishedError once the run has ended.
  //
  // Batch runs end with their last unit. A stepped run whose plan is
  // exhausted stays open at a final boundary for operator commands; the next
  // step() closes it and returns no events.
  std::vector<TranscriptEvent> step();

  // Runs the remaining plan. Reflection answers for distinct members are
  // computed concurrently and committed in roster x question order.
  void run_to_completion();

  // Operator commands; stepped mode only, at a cycle boundary (after the
  // openings, between cycles, during the reflection phase or after the plan).
  // PhaseError otherwise; FinishedError after the run ends.
  TranscriptEvent inject_perturbation(const std::string& content);
  TranscriptEvent ask_reflection(const std::string& agent_id, const std::string& question);

  // Ends an unfinished run as aborted with `reason`; subscribers are released.
  void cancel(const std::string& reason);

  bool finished() const noexcept;
  bool aborted() const noexcept { return aborted_; }
  bool at_boundary() const noexcept;
  RunPhase phase() const noexcept;
  int completed_cycles() const noexcept { return completed_cycles_; }

  const Scenario& scenario() const noexcept { return scenario_; }
  const Roster& roster() const noexcept { return roster_; }
  const RunConfig& config() const noexcept { return config_; }
  const Transcript& transcript() const noexcept { return transcript_; }
  const MemoryStream& memory(const std::string& agent_id) const;  // UnknownAgentError
  const std::vector<MemoryStream>& memories() const noexcept { return memories_; }

  EventLog::Subscription subscribe(std::size_t from = 0) const { return log_.subscribe(from); }
  const EventLog& events() const noexcept { return log_; }

  Json state_json() const;
  Json run_metadata_json() const;

  // transcript.jsonl, transcript.txt, memory/<agent_id>.json, run.json.
  void write_outputs(const std::filesystem::path& dir) const;

 private:
  enum class UnitKind { scenario_prompt, opening, turn, perturbation, reflection };
  struct Unit {
    UnitKind kind;
    int cycle = 0;
    std::size_t agent = 0;
    std::size_t item = 0;  // perturbation or question index
  };
  struct Answer {
    std::string text;
    ResultSource source = ResultSource::live;
  };

  void build_plan();
  std::string describe(const Unit& unit) const;
  void execute(const Unit& unit);
  TranscriptEvent commit(TranscriptEvent event, MemoryKind memory_kind, std::optional<std::size_t> only_agent);
  Answer ask(const PromptBundle& bundle, std::size_t agent);
  Answer reflect(const MemoryStream& stream, std::size_t agent, const std::string& question);
  TranscriptEvent commit_reflection(std::size_t agent, const std::string& question, const Answer& answer);
  void require_operator_position(const char* command) const;
  void mark_started();
  void finish();
  [[noreturn]] void abort_run(std::exception_ptr error);

  Scenario scenario_;
  Roster roster_;
  ModelBackend& backend_;
  RunConfig config_;
  PromptBuilder prompts_;
  std::vector<std::string> reflected_;

  std::vector<Unit> plan_;
  std::size_t cursor_ = 0;
  int completed_cycles_ = 0;
  Timestep clock_ = 0;
  bool aborted_ = false;
  bool closed_ = false;
  std::string error_;

  Transcript transcript_;
  std::vector<MemoryStream> memories_;
  EventLog log_;
  std::array<std::size_t, 3> source_counts_{};
  std::string started_at_;
  std::string finished_at_;
};

// Batch run: validates, runs every unit, writes outputs when configured.
Transcript run_scenario(const Scenario& scenario, const Roster& roster, ModelBackend& backend,
                        const RunConfig& config = {});

}  // namespace chamber
