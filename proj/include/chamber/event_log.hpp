#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "chamber/transcript.hpp"

namespace chamber {

// Single-producer, multi-consumer log of a run's events. Every subscriber
// sees every event exactly once in index order; late subscribers start with
// the full backlog.
class EventLog {
  struct Shared {
    std::mutex mutex;
    std::condition_variable cv;
    std::vector<TranscriptEvent> events;
    bool closed = false;
  };

 public:
  class Subscription {
   public:
    // Blocks until the next event is available. nullopt once the log is
    // closed and drained.
    std::optional<TranscriptEvent> next();
    // As next(), but also returns nullopt after `timeout` with nothing new.
    std::optional<TranscriptEvent> next_for(std::chrono::milliseconds timeout);
    bool finished() const;
    std::size_t cursor() const noexcept { return cursor_; }

   private:
    friend class EventLog;
    Subscription(std::shared_ptr<Shared> shared, std::size_t cursor) : shared_(std::move(shared)), cursor_(cursor) {}

    std::shared_ptr<Shared> shared_;
    std::size_t cursor_;
  };

  EventLog() : shared_(std::make_shared<Shared>()) {}

  void publish(const TranscriptEvent& event);
  void close();
  bool closed() const;

  std::vector<TranscriptEvent> snapshot() const;

  // from: first event index to deliver (0 = everything).
  Subscription subscribe(std::size_t from = 0) const;

 private:
  std::shared_ptr<Shared> shared_;
};

}  // namespace chamber
