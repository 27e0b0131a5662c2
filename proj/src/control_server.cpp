#include "chamber/control_server.hpp"

#include <httplib.h>

#include "chamber/eval.hpp"

namespace chamber {

namespace {

Json events_json(const std::vector<TranscriptEvent>& events) {
  Json out = Json::array();
  for (const auto& e : events) out.push_back(event_to_json(e));
  return out;
}

}  // namespace

// RunController

RunController::RunController(Scenario scenario, Roster roster, std::unique_ptr<ModelBackend> backend,
                             RunConfig config)
    : backend_(std::move(backend)),
      session_(std::move(scenario), std::move(roster), *backend_, std::move(config)),
      run_id_(session_.config().run_id),
      mode_(session_.config().mode) {
  refresh();
  if (mode_ == RunMode::batch) {
    queue_.emplace_back([this] {
      session_.run_to_completion();
      return std::vector<TranscriptEvent>{};
    });
  }
  thread_ = std::thread([this] { worker(); });
}

RunController::~RunController() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void RunController::worker() {
  std::unique_lock lock(mutex_);
  for (;;) {
    cv_.wait(lock, [&] { return stop_ || !queue_.empty() || auto_; });
    if (stop_) break;
    busy_ = true;
    if (!queue_.empty()) {
      Task task = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      task();
      refresh();
      lock.lock();
    } else {
      lock.unlock();
      std::string error;
      try {
        session_.step();
      } catch (const std::exception& e) {
        error = e.what();
      }
      refresh();
      lock.lock();
      if (!error.empty()) last_error_ = error;
      if (!error.empty() || session_.finished() || (until_boundary_ && session_.at_boundary())) {
        auto_ = false;
      }
    }
    busy_ = false;
    idle_cv_.notify_all();
  }
}

void RunController::refresh() {
  auto state = session_.state_json();
  auto memories = session_.memories();
  std::lock_guard lock(mutex_);
  state_ = std::move(state);
  memories_ = std::move(memories);
}

std::vector<TranscriptEvent> RunController::submit(std::function<std::vector<TranscriptEvent>()> fn) {
  // The snapshot is refreshed before the caller's future becomes ready.
  Task task([this, fn = std::move(fn)] {
    try {
      auto events = fn();
      refresh();
      return events;
    } catch (...) {
      refresh();
      throw;
    }
  });
  auto result = task.get_future();
  {
    std::lock_guard lock(mutex_);
    if (stop_) throw FinishedError("run " + run_id_ + " is no longer active");
    queue_.push_back(std::move(task));
  }
  cv_.notify_all();
  return result.get();
}

void RunController::require_stepped(const char* command) const {
  if (mode_ != RunMode::stepped) {
    throw PhaseError(std::string(command) + " requires a stepped run");
  }
}

std::vector<TranscriptEvent> RunController::step() {
  require_stepped("step");
  return submit([this] { return session_.step(); });
}

std::vector<TranscriptEvent> RunController::perturb(const std::string& content) {
  require_stepped("perturb");
  return submit([this, content] { return std::vector{session_.inject_perturbation(content)}; });
}

std::vector<TranscriptEvent> RunController::ask(const std::string& agent_id, const std::string& question) {
  require_stepped("ask");
  return submit([this, agent_id, question] { return std::vector{session_.ask_reflection(agent_id, question)}; });
}

void RunController::resume(bool until_boundary) {
  require_stepped("resume");
  {
    std::lock_guard lock(mutex_);
    if (state_.value("finished", false)) {
      throw FinishedError("run " + run_id_ + " has ended");
    }
    auto_ = true;
    until_boundary_ = until_boundary;
  }
  cv_.notify_all();
}

void RunController::pause() {
  require_stepped("pause");
  std::lock_guard lock(mutex_);
  auto_ = false;
}

bool RunController::auto_stepping() const {
  std::lock_guard lock(mutex_);
  return auto_;
}

void RunController::cancel(const std::string& reason) {
  {
    std::lock_guard lock(mutex_);
    auto_ = false;
  }
  try {
    submit([this, reason] {
      session_.cancel(reason);
      return std::vector<TranscriptEvent>{};
    });
  } catch (const FinishedError&) {
  }
}

void RunController::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [&] { return stop_ || (queue_.empty() && !auto_ && !busy_); });
}

Json RunController::state() const {
  std::lock_guard lock(mutex_);
  Json j = state_;
  j["auto_stepping"] = auto_;
  j["busy"] = busy_ || !queue_.empty();
  if (!last_error_.empty()) j["last_error"] = last_error_;
  return j;
}

Json RunController::memory(const std::string& agent_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& stream : memories_) {
    if (stream.owner() == agent_id) return stream_to_json(stream);
  }
  throw UnknownAgentError("unknown agent_id \"" + agent_id + "\"");
}

std::vector<TranscriptEvent> RunController::events_since(std::size_t from) const {
  auto all = session_.events().snapshot();
  if (from >= all.size()) return {};
  return {all.begin() + static_cast<std::ptrdiff_t>(from), all.end()};
}

// ControlServer

namespace {

int status_for(const Error& e) {
  if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const EmptyResponseError*>(&e)) return 502;
  if (dynamic_cast<const PhaseError*>(&e) || dynamic_cast<const FinishedError*>(&e)) return 409;
  if (dynamic_cast<const UnknownAgentError*>(&e) || dynamic_cast<const NoRunError*>(&e)) return 404;
  if (dynamic_cast<const IoError*>(&e)) return 500;
  return 400;
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view type, std::string_view message) {
  send_json(res, status, Json{{"error", {{"type", type}, {"message", message}}}});
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto body = parse_json(req.body, "request body");
  if (!body.is_object()) throw ValidationError("body", "expected a JSON object");
  return body;
}

std::size_t since_param(const httplib::Request& req) {
  std::string text;
  if (req.has_param("since")) {
    text = req.get_param_value("since");
  } else if (req.has_header("Last-Event-ID")) {
    auto last = req.get_header_value("Last-Event-ID");
    try {
      return static_cast<std::size_t>(std::stoll(last)) + 1;
    } catch (const std::exception&) {
      throw ValidationError("Last-Event-ID", "expected an event index");
    }
  } else {
    return 0;
  }
  try {
    std::size_t used = 0;
    auto value = std::stoll(text, &used);
    if (used != text.size() || value < 0) throw std::invalid_argument(text);
    return static_cast<std::size_t>(value);
  } catch (const std::exception&) {
    throw ValidationError("since", "expected a non-negative integer");
  }
}

std::string sse_frame(const TranscriptEvent& e) {
  return "id: " + std::to_string(e.index) + "\nevent: transcript\ndata: " + event_to_json(e).dump() + "\n\n";
}

}  // namespace

ControlServer::ControlServer(ServerOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ControlServer::~ControlServer() {
  stop();
}

std::shared_ptr<RunController> ControlServer::current() const {
  std::lock_guard lock(mutex_);
  return run_;
}

void ControlServer::routes() {
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guarded = [](Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e), e.type_name(), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  };
  auto require_run = [this] {
    auto run = current();
    if (!run) throw NoRunError("no run has been started");
    return run;
  };
  auto& svr = *server_;

  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Post("/api/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_of(req);
    Scenario scenario = body.contains("scenario") ? scenario_from_json(body["scenario"])
                        : options_.scenario     ? *options_.scenario
                                                : throw ValidationError("scenario", "no scenario given or configured");
    Roster roster = body.contains("roster") ? roster_from_json(body["roster"])
                    : options_.roster       ? *options_.roster
                                            : throw ValidationError("roster", "no roster given or configured");
    RunConfig config = options_.base_config;
    if (body.contains("seed")) config.seed = require_integer(body, "seed");
    if (body.contains("run_id")) config.run_id = require_string(body, "run_id");
    config.mode = RunMode::stepped;
    if (body.contains("mode")) {
      auto mode = require_string(body, "mode");
      if (mode == "batch") {
        config.mode = RunMode::batch;
      } else if (mode != "stepped") {
        throw ValidationError("mode", "expected \"stepped\" or \"batch\"");
      }
    }
    if (config.run_id.empty()) config.run_id = scenario.scenario_id + "-seed" + std::to_string(config.seed);
    if (!config.output_dir.empty()) config.output_dir /= config.run_id;
    if (!options_.backend_factory) throw ValidationError("backend", "server has no backend configured");

    std::lock_guard lock(mutex_);
    if (run_ && !run_->state().value("finished", false)) {
      if (!body.value("replace", false)) {
        throw PhaseError("run " + run_->run_id() + " is still in progress; pass \"replace\": true to abandon it");
      }
      run_->cancel("replaced by run " + config.run_id);
    }
    run_ = std::make_shared<RunController>(std::move(scenario), std::move(roster), options_.backend_factory(),
                                           std::move(config));
    send_json(res, 201, run_->state());
  }));

  svr.Get("/api/state", guarded([require_run](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, require_run()->state());
  }));

  svr.Get("/api/events", guarded([require_run](const httplib::Request& req, httplib::Response& res) {
    auto run = require_run();
    auto from = since_param(req);
    auto state = run->state();
    send_json(res, 200, Json{{"events", events_json(run->events_since(from))}, {"finished", state["finished"]}});
  }));

  svr.Get("/api/events/stream", guarded([this, require_run](const httplib::Request& req, httplib::Response& res) {
    auto run = require_run();
    auto sub = std::make_shared<EventLog::Subscription>(run->subscribe(since_param(req)));
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, run, sub](std::size_t, httplib::DataSink& sink) {
          if (stopping_) return false;
          if (auto e = sub->next_for(std::chrono::milliseconds(250))) {
            auto frame = sse_frame(*e);
            return sink.write(frame.data(), frame.size());
          }
          if (sub->finished()) {
            const std::string end = "event: end\ndata: " + Json{{"run_id", run->run_id()}}.dump() + "\n\n";
            sink.write(end.data(), end.size());
            sink.done();
            return true;
          }
          const std::string keepalive = ": keepalive\n\n";
          return sink.write(keepalive.data(), keepalive.size());
        });
  }));

  auto mutation = [require_run](const std::function<std::vector<TranscriptEvent>(RunController&, const Json&)>& fn) {
    return [require_run, fn](const httplib::Request& req, httplib::Response& res) {
      auto run = require_run();
      auto body = body_of(req);
      auto events = fn(*run, body);
      send_json(res, 200, Json{{"events", events_json(events)}, {"state", run->state()}});
    };
  };

  svr.Post("/api/step", guarded(mutation([](RunController& run, const Json&) { return run.step(); })));
  svr.Post("/api/perturb", guarded(mutation([](RunController& run, const Json& body) {
             return run.perturb(require_string(body, "content"));
           })));
  svr.Post("/api/ask", guarded(mutation([](RunController& run, const Json& body) {
             return run.ask(require_string(body, "agent_id"), require_string(body, "question"));
           })));
  svr.Post("/api/pause", guarded(mutation([](RunController& run, const Json&) {
             run.pause();
             return std::vector<TranscriptEvent>{};
           })));
  svr.Post("/api/resume", guarded(mutation([](RunController& run, const Json& body) {
             auto until = body.contains("until") ? require_string(body, "until") : std::string("end");
             if (until != "end" && until != "boundary") {
               throw ValidationError("until", "expected \"end\" or \"boundary\"");
             }
             run.resume(until == "boundary");
             return std::vector<TranscriptEvent>{};
           })));

  svr.Get("/api/memory/:agent_id", guarded([require_run](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, require_run()->memory(req.path_params.at("agent_id")));
  }));

  svr.Post("/api/scores", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_of(req);
    const auto scenario_id = require_string(body, "scenario_id");
    ScoreRecord record{require_string(body, "run_id"), require_string(body, "rater_id"),
                       require_number(body, "score")};
    for (const auto* field : {"scenario_id", "run_id", "rater_id"}) {
      if (trim(body[field].get<std::string>()).empty()) throw ValidationError(field, "must be non-empty");
    }
    if (!(record.score >= 0.0 && record.score <= 10.0)) {
      throw RangeError("score " + std::to_string(record.score) + " is outside [0, 10]");
    }
    std::lock_guard lock(scores_mutex_);
    std::string text;
    if (std::filesystem::exists(options_.scores_path)) {
      text = read_text_file(options_.scores_path);
      for (const auto& ds : parse_scores_csv(text, options_.scores_path.string(), ScoreCheck::rows)) {
        if (ds.scenario_id != scenario_id) continue;
        for (const auto& r : ds.records) {
          if (r.run_id == record.run_id && r.rater_id == record.rater_id) {
            throw ValidationError("run_id", "rater " + record.rater_id + " already scored run " + record.run_id);
          }
        }
      }
    } else {
      text = kScoresCsvHeader;
    }
    if (!text.empty() && text.back() != '\n') text += '\n';
    text += score_csv_row(scenario_id, record);
    write_text_file(options_.scores_path, text);
    send_json(res, 201, Json{{"scenario_id", scenario_id},
                             {"run_id", record.run_id},
                             {"rater_id", record.rater_id},
                             {"score", record.score}});
  }));

  svr.Get("/api/scores", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(scores_mutex_);
    Json records = Json::array();
    if (std::filesystem::exists(options_.scores_path)) {
      for (const auto& ds :
           parse_scores_csv(read_text_file(options_.scores_path), options_.scores_path.string(), ScoreCheck::rows)) {
        for (const auto& r : ds.records) {
          records.push_back(
              Json{{"scenario_id", ds.scenario_id}, {"run_id", r.run_id}, {"rater_id", r.rater_id}, {"score", r.score}});
        }
      }
    }
    send_json(res, 200, Json{{"records", std::move(records)}});
  }));

  svr.Get("/api/report", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(scores_mutex_);
    const auto tail = req.get_param_value("tail") == "one" ? Tail::one : Tail::two;
    send_json(res, 200, report_to_json(table_report(ingest_scores(options_.scores_path), tail)));
  }));
}

int ControlServer::bind() {
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
    if (port < 0) port = 0;
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = 0;
  }
  if (port == 0) {
    throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  options_.port = port;
  return port;
}

void ControlServer::serve() {
  server_->listen_after_bind();
}

int ControlServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { serve(); });
  server_->wait_until_ready();
  return port;
}

void ControlServer::stop() {
  stopping_ = true;
  server_->stop();
  if (thread_.joinable()) thread_.join();
  std::shared_ptr<RunController> run;
  {
    std::lock_guard lock(mutex_);
    run = std::move(run_);
  }
}

}  // namespace chamber
