#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "chamber/engine.hpp"

namespace httplib {
class Server;
}

namespace chamber {

using BackendFactory = std::function<std::unique_ptr<ModelBackend>()>;

// Owns one Session and serializes every command through a single worker
// thread. Reads (state, memory, events) come from snapshots and the event log.
class RunController {
 public:
  RunController(Scenario scenario, Roster roster, std::unique_ptr<ModelBackend> backend, RunConfig config);
  ~RunController();

  RunController(const RunController&) = delete;
  RunController& operator=(const RunController&) = delete;

  // Mutating commands. Each returns the events it emitted. PhaseError in
  // batch mode; engine errors propagate.
  std::vector<TranscriptEvent> step();
  std::vector<TranscriptEvent> perturb(const std::string& content);
  std::vector<TranscriptEvent> ask(const std::string& agent_id, const std::string& question);

  // Auto-stepping. With until_boundary, stepping stops at the next boundary.
  void resume(bool until_boundary);
  void pause();
  bool auto_stepping() const;

  // Cancels an unfinished run and stops the worker.
  void cancel(const std::string& reason);

  // Blocks until the worker is idle (no queued command, not auto-stepping).
  void wait_idle();

  Json state() const;
  Json memory(const std::string& agent_id) const;  // UnknownAgentError
  std::vector<TranscriptEvent> events_since(std::size_t from) const;
  EventLog::Subscription subscribe(std::size_t from) const { return session_.subscribe(from); }
  const std::string& run_id() const noexcept { return run_id_; }
  RunMode mode() const noexcept { return mode_; }

 private:
  using Task = std::packaged_task<std::vector<TranscriptEvent>()>;

  std::vector<TranscriptEvent> submit(std::function<std::vector<TranscriptEvent>()> fn);
  void require_stepped(const char* command) const;
  void worker();
  void refresh();

  std::unique_ptr<ModelBackend> backend_;
  Session session_;
  std::string run_id_;
  RunMode mode_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<Task> queue_;
  bool auto_ = false;
  bool until_boundary_ = false;
  bool busy_ = false;
  bool stop_ = false;
  std::string last_error_;
  Json state_;
  std::vector<MemoryStream> memories_;
  std::thread thread_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0: any free port
  std::optional<Scenario> scenario;  // defaults for POST /api/runs
  std::optional<Roster> roster;
  RunConfig base_config;  // output_dir, when set, gets one subdirectory per run_id
  BackendFactory backend_factory;
  std::filesystem::path scores_path = "scores.csv";
};

// HTTP control API over one current run. Errors are
// {"error": {"type": <error type>, "message": ...}} with 400 (invalid input),
// 404 (unknown agent or no run), 409 (phase or finished), 502 (backend).
class ControlServer {
 public:
  explicit ControlServer(ServerOptions options);
  ~ControlServer();

  // Returns the bound port. Throws IoError when binding fails.
  int bind();
  // Blocks until stop(). Call bind() first.
  void serve();
  // bind() + serve() on a background thread.
  int start();
  void stop();

  std::shared_ptr<RunController> current() const;

 private:
  void routes();

  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mutex_;
  std::shared_ptr<RunController> run_;
  std::mutex scores_mutex_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace chamber
