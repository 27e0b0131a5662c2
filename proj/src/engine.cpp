#include "chamber/engine.hpp"

#include <chrono>
#include <ctime>
#include <future>
#include <map>
#include <variant>

namespace chamber {

std::string_view to_string(RunMode mode) {
  return mode == RunMode::batch ? "batch" : "stepped";
}

std::string_view to_string(RunPhase phase) {
  switch (phase) {
    case RunPhase::not_started: return "not_started";
    case RunPhase::opening: return "opening";
    case RunPhase::debate: return "debate";
    case RunPhase::reflection: return "reflection";
    case RunPhase::finished: return "finished";
    case RunPhase::aborted: return "aborted";
  }
  return "not_started";
}

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string non_empty_reply(const std::string& raw, const std::string& who, std::string_view phase) {
  auto text = trim(raw);
  if (text.empty()) {
    throw EmptyResponseError("empty " + std::string(phase) + " reply from " + who);
  }
  return text;
}

}  // namespace

Session::Session(Scenario scenario, Roster roster, ModelBackend& backend, RunConfig config)
    : scenario_(std::move(scenario)),
      roster_(std::move(roster)),
      backend_(backend),
      config_(std::move(config)),
      prompts_(config_.templates, config_.seed, speaker_names(roster_)) {
  validate_scenario(scenario_, roster_);
  reflected_ = reflected_agents(scenario_, roster_);
  if (config_.run_id.empty()) {
    config_.run_id = scenario_.scenario_id + "-seed" + std::to_string(config_.seed);
  }
  transcript_.header.run_id = config_.run_id;
  transcript_.header.scenario_id = scenario_.scenario_id;
  transcript_.header.model = config_.model;
  transcript_.header.seed = config_.seed;
  transcript_.header.roster = roster_;
  for (const auto& m : roster_.members()) {
    memories_.emplace_back(m.agent_id);
  }
  build_plan();
}

void Session::build_plan() {
  const auto members = roster_.size();
  plan_.push_back({UnitKind::scenario_prompt});
  for (std::size_t a = 0; a < members; ++a) {
    plan_.push_back({UnitKind::opening, 0, a});
  }
  auto add_perturbations = [&](int boundary) {
    for (std::size_t j = 0; j < scenario_.perturbations.size(); ++j) {
      if (scenario_.perturbations[j].after_cycle == boundary) {
        plan_.push_back({UnitKind::perturbation, boundary, 0, j});
      }
    }
  };
  add_perturbations(0);
  for (int c = 1; c <= scenario_.cycles; ++c) {
    for (std::size_t a = 0; a < members; ++a) {
      plan_.push_back({UnitKind::turn, c, a});
    }
    add_perturbations(c);
  }
  for (const auto& id : reflected_) {
    for (std::size_t q = 0; q < scenario_.reflection_questions.size(); ++q) {
      plan_.push_back({UnitKind::reflection, scenario_.cycles, *roster_.index_of(id), q});
    }
  }
}

bool Session::finished() const noexcept {
  return aborted_ || closed_;
}

bool Session::at_boundary() const noexcept {
  if (finished() || cursor_ == 0) return false;
  if (cursor_ >= plan_.size()) return true;
  const auto& next = plan_[cursor_];
  return next.kind == UnitKind::perturbation || next.kind == UnitKind::reflection ||
         (next.kind == UnitKind::turn && next.agent == 0);
}

RunPhase Session::phase() const noexcept {
  if (aborted_) return RunPhase::aborted;
  if (closed_) return RunPhase::finished;
  if (cursor_ >= plan_.size()) return RunPhase::reflection;
  if (cursor_ == 0) return RunPhase::not_started;
  switch (plan_[cursor_].kind) {
    case UnitKind::scenario_prompt:
    case UnitKind::opening: return RunPhase::opening;
    case UnitKind::turn:
    case UnitKind::perturbation: return RunPhase::debate;
    case UnitKind::reflection: return RunPhase::reflection;
  }
  return RunPhase::debate;
}

const MemoryStream& Session::memory(const std::string& agent_id) const {
  auto index = roster_.index_of(agent_id);
  if (!index) {
    throw UnknownAgentError("unknown agent_id \"" + agent_id + "\"");
  }
  return memories_[*index];
}

std::string Session::describe(const Unit& u) const {
  const auto& members = roster_.members();
  switch (u.kind) {
    case UnitKind::scenario_prompt: return "scenario_prompt";
    case UnitKind::opening: return "opening_statement:" + members[u.agent].agent_id;
    case UnitKind::turn: return "turn:" + std::to_string(u.cycle) + ":" + members[u.agent].agent_id;
    case UnitKind::perturbation: return "perturbation:" + std::to_string(u.cycle);
    case UnitKind::reflection: return "reflection_answer:" + members[u.agent].agent_id + ":" + std::to_string(u.item);
  }
  return "";
}

void Session::mark_started() {
  if (started_at_.empty()) started_at_ = utc_now();
}

TranscriptEvent Session::commit(TranscriptEvent event, MemoryKind memory_kind, std::optional<std::size_t> only_agent) {
  event.index = static_cast<std::int64_t>(transcript_.events.size());
  event.timestep = clock_++;
  for (std::size_t a = 0; a < memories_.size(); ++a) {
    if (only_agent && *only_agent != a) continue;
    memories_[a].append({event.timestep, memory_kind, event.agent, event.content, scenario_.scenario_id});
  }
  transcript_.events.push_back(event);
  log_.publish(event);
  return event;
}

Session::Answer Session::ask(const PromptBundle& bundle, std::size_t agent) {
  const auto& id = roster_.members()[agent].agent_id;
  auto result = backend_.complete(make_request(bundle, config_.model, {id, std::string(to_string(bundle.phase))}));
  return {std::move(result.text), result.source};
}

Session::Answer Session::reflect(const MemoryStream& stream, std::size_t agent, const std::string& question) {
  const auto& profile = roster_.members()[agent];
  auto answer = ask(prompts_.reflection(profile, scenario_, stream.full_history(), question), agent);
  answer.text = non_empty_reply(answer.text, profile.agent_id, "reflection");
  return answer;
}

TranscriptEvent Session::commit_reflection(std::size_t agent, const std::string& question, const Answer& answer) {
  ++source_counts_[static_cast<std::size_t>(answer.source)];
  TranscriptEvent e;
  e.kind = EventKind::reflection_answer;
  e.agent = roster_.members()[agent].agent_id;
  e.content = answer.text;
  e.question = question;
  return commit(std::move(e), MemoryKind::reflection, agent);
}

void Session::execute(const Unit& u) {
  const auto& members = roster_.members();
  const auto window = static_cast<std::size_t>(scenario_.context_window_k);
  switch (u.kind) {
    case UnitKind::scenario_prompt: {
      TranscriptEvent e;
      e.kind = EventKind::scenario_prompt;
      e.content = scenario_.topic_prompt;
      commit(std::move(e), MemoryKind::scenario_prompt, std::nullopt);
      break;
    }
    case UnitKind::opening: {
      const auto& profile = members[u.agent];
      auto answer = ask(prompts_.opening(profile, scenario_), u.agent);
      ++source_counts_[static_cast<std::size_t>(answer.source)];
      TranscriptEvent e;
      e.kind = EventKind::opening_statement;
      e.agent = profile.agent_id;
      e.content = non_empty_reply(answer.text, profile.agent_id, "opening");
      commit(std::move(e), MemoryKind::observation, std::nullopt);
      break;
    }
    case UnitKind::turn: {
      const auto& profile = members[u.agent];
      auto& own = memories_[u.agent];
      auto answer = ask(prompts_.turn(profile, scenario_, own.context_window(window, clock_), u.cycle), u.agent);
      ++source_counts_[static_cast<std::size_t>(answer.source)];
      auto action = parse_turn_response(answer.text, roster_);
      TranscriptEvent e;
      e.kind = EventKind::turn;
      e.cycle = u.cycle;
      e.agent = profile.agent_id;
      e.content = render_turn_reply(action, roster_);
      e.action = std::move(action);
      commit(std::move(e), MemoryKind::observation, std::nullopt);

      auto reading = ask(prompts_.interpretation(profile, own.context_window(window, clock_), scenario_.decoding),
                         u.agent);
      ++source_counts_[static_cast<std::size_t>(reading.source)];
      own.append({clock_++, MemoryKind::interpretation, profile.agent_id,
                  non_empty_reply(reading.text, profile.agent_id, "interpretation"), scenario_.scenario_id});
      if (u.agent + 1 == members.size()) {
        completed_cycles_ = u.cycle;
      }
      break;
    }
    case UnitKind::perturbation: {
      TranscriptEvent e;
      e.kind = EventKind::perturbation;
      e.cycle = u.cycle;
      e.content = scenario_.perturbations[u.item].content;
      commit(std::move(e), MemoryKind::perturbation, std::nullopt);
      break;
    }
    case UnitKind::reflection: {
      const auto& question = scenario_.reflection_questions[u.item];
      commit_reflection(u.agent, question, reflect(memories_[u.agent], u.agent, question));
      break;
    }
  }
}

std::vector<TranscriptEvent> Session::step() {
  if (finished()) {
    throw FinishedError(aborted_ ? "run " + config_.run_id + " was aborted: " + error_
                                 : "run " + config_.run_id + " is complete");
  }
  mark_started();
  if (cursor_ >= plan_.size()) {
    finish();
    return {};
  }
  const auto before = transcript_.events.size();
  try {
    execute(plan_[cursor_]);
  } catch (...) {
    abort_run(std::current_exception());
  }
  ++cursor_;
  if (cursor_ == plan_.size() && config_.mode == RunMode::batch) {
    finish();
  }
  return {transcript_.events.begin() + static_cast<std::ptrdiff_t>(before), transcript_.events.end()};
}

void Session::run_to_completion() {
  while (!finished() && cursor_ < plan_.size() && plan_[cursor_].kind != UnitKind::reflection) {
    step();
  }
  if (finished()) return;
  mark_started();

  // Remaining units are all reflections: one worker per member, each on a
  // private copy of its stream, committed afterwards in plan order.
  const std::vector<Unit> pending(plan_.begin() + static_cast<std::ptrdiff_t>(cursor_), plan_.end());
  std::map<std::size_t, std::vector<std::size_t>> by_agent;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    by_agent[pending[i].agent].push_back(i);
  }
  using Outcome = std::variant<std::monostate, Answer, std::exception_ptr>;
  std::vector<Outcome> outcomes(pending.size());
  std::vector<std::future<void>> workers;
  for (const auto& [agent, units] : by_agent) {
    workers.push_back(std::async(std::launch::async, [&, agent = agent, units = units] {
      auto stream = memories_[agent];
      for (auto i : units) {
        const auto& question = scenario_.reflection_questions[pending[i].item];
        try {
          auto answer = reflect(stream, agent, question);
          stream.append({clock_ + static_cast<Timestep>(i), MemoryKind::reflection, roster_.members()[agent].agent_id,
                         answer.text, scenario_.scenario_id});
          outcomes[i] = std::move(answer);
        } catch (...) {
          outcomes[i] = std::current_exception();
          return;
        }
      }
    }));
  }
  for (auto& w : workers) w.get();

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (auto* error = std::get_if<std::exception_ptr>(&outcomes[i])) {
      abort_run(*error);
    }
    const auto& u = pending[i];
    commit_reflection(u.agent, scenario_.reflection_questions[u.item], std::get<Answer>(outcomes[i]));
    ++cursor_;
  }
  finish();
}

void Session::require_operator_position(const char* command) const {
  if (finished()) {
    throw FinishedError(std::string(command) + ": run " + config_.run_id + " has ended");
  }
  if (config_.mode != RunMode::stepped) {
    throw PhaseError(std::string(command) + " requires stepped mode");
  }
  if (!at_boundary()) {
    throw PhaseError(std::string(command) + " is only allowed at a cycle boundary; next unit is " +
                     describe(plan_[cursor_]));
  }
}

TranscriptEvent Session::inject_perturbation(const std::string& content) {
  if (trim(content).empty()) {
    throw ValidationError("content", "perturbation content must be non-empty");
  }
  require_operator_position("inject_perturbation");
  TranscriptEvent e;
  e.kind = EventKind::perturbation;
  e.cycle = completed_cycles_;
  e.content = content;
  auto committed = commit(std::move(e), MemoryKind::perturbation, std::nullopt);
  transcript_.header.operator_events.push_back(committed.index);
  return committed;
}

TranscriptEvent Session::ask_reflection(const std::string& agent_id, const std::string& question) {
  auto agent = roster_.index_of(agent_id);
  if (!agent) {
    throw UnknownAgentError("unknown agent_id \"" + agent_id + "\"");
  }
  if (trim(question).empty()) {
    throw ValidationError("question", "must be non-empty");
  }
  require_operator_position("ask_reflection");
  Answer answer;
  try {
    answer = reflect(memories_[*agent], *agent, question);
  } catch (...) {
    abort_run(std::current_exception());
  }
  auto committed = commit_reflection(*agent, question, answer);
  transcript_.header.operator_events.push_back(committed.index);
  return committed;
}

void Session::finish() {
  closed_ = true;
  finished_at_ = utc_now();
  transcript_.header.complete = true;
  log_.close();
  if (!config_.output_dir.empty()) {
    write_outputs(config_.output_dir);
  }
}

void Session::cancel(const std::string& reason) {
  if (finished()) return;
  aborted_ = true;
  error_ = reason;
  finished_at_ = utc_now();
  transcript_.header.complete = false;
  log_.close();
  if (!config_.output_dir.empty()) {
    write_outputs(config_.output_dir);
  }
}

void Session::abort_run(std::exception_ptr error) {
  aborted_ = true;
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    error_ = e.what();
  } catch (...) {
    error_ = "unknown error";
  }
  finished_at_ = utc_now();
  transcript_.header.complete = false;
  log_.close();
  if (!config_.output_dir.empty()) {
    try {
      write_outputs(config_.output_dir);
    } catch (const std::exception&) {
    }
  }
  std::rethrow_exception(error);
}

Json Session::state_json() const {
  Json j;
  j["run_id"] = config_.run_id;
  j["scenario_id"] = scenario_.scenario_id;
  j["mode"] = std::string(to_string(config_.mode));
  j["phase"] = std::string(to_string(phase()));
  j["completed_cycles"] = completed_cycles_;
  j["cycles"] = scenario_.cycles;
  j["event_count"] = transcript_.events.size();
  j["finished"] = finished();
  j["at_boundary"] = at_boundary();
  j["can_perturb"] = config_.mode == RunMode::stepped && at_boundary();
  j["can_ask"] = config_.mode == RunMode::stepped && at_boundary();
  j["next"] = cursor_ < plan_.size() && !finished() ? Json(describe(plan_[cursor_])) : Json(nullptr);
  Json roster = Json::array();
  for (const auto& m : roster_.members()) {
    roster.push_back(Json{{"agent_id", m.agent_id}, {"name", m.name}, {"party", std::string(to_string(m.party))}});
  }
  j["roster"] = std::move(roster);
  if (aborted_) j["error"] = error_;
  return j;
}

Json Session::run_metadata_json() const {
  Json j;
  j["run_id"] = config_.run_id;
  j["scenario_id"] = scenario_.scenario_id;
  j["model"] = config_.model;
  j["seed"] = config_.seed;
  j["mode"] = std::string(to_string(config_.mode));
  j["complete"] = transcript_.header.complete;
  j["started_at"] = started_at_;
  j["finished_at"] = finished_at_;
  j["event_count"] = transcript_.events.size();
  j["backend_sources"] = Json{{"live", source_counts_[static_cast<std::size_t>(ResultSource::live)]},
                              {"scripted", source_counts_[static_cast<std::size_t>(ResultSource::scripted)]},
                              {"cache", source_counts_[static_cast<std::size_t>(ResultSource::cache)]}};
  j["operator_events"] = transcript_.header.operator_events;
  if (aborted_) j["error"] = error_;
  return j;
}

void Session::write_outputs(const std::filesystem::path& dir) const {
  write_text_file(dir / "transcript.jsonl", to_jsonl(transcript_));
  write_text_file(dir / "transcript.txt", render_text(transcript_));
  for (const auto& stream : memories_) {
    save_stream(stream, dir / "memory" / (stream.owner() + ".json"));
  }
  write_text_file(dir / "run.json", run_metadata_json().dump(2) + "\n");
}

Transcript run_scenario(const Scenario& scenario, const Roster& roster, ModelBackend& backend,
                        const RunConfig& config) {
  Session session(scenario, roster, backend, config);
  session.run_to_completion();
  return session.transcript();
}

}  // namespace chamber
