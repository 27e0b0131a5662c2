#include "chamber/event_log.hpp"

namespace chamber {

void EventLog::publish(const TranscriptEvent& event) {
  {
    std::lock_guard lock(shared_->mutex);
    shared_->events.push_back(event);
  }
  shared_->cv.notify_all();
}

void EventLog::close() {
  {
    std::lock_guard lock(shared_->mutex);
    shared_->closed = true;
  }
  shared_->cv.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->closed;
}

std::vector<TranscriptEvent> EventLog::snapshot() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->events;
}

EventLog::Subscription EventLog::subscribe(std::size_t from) const {
  return Subscription(shared_, from);
}

std::optional<TranscriptEvent> EventLog::Subscription::next() {
  std::unique_lock lock(shared_->mutex);
  shared_->cv.wait(lock, [&] { return cursor_ < shared_->events.size() || shared_->closed; });
  if (cursor_ < shared_->events.size()) {
    return shared_->events[cursor_++];
  }
  return std::nullopt;
}

std::optional<TranscriptEvent> EventLog::Subscription::next_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(shared_->mutex);
  shared_->cv.wait_for(lock, timeout, [&] { return cursor_ < shared_->events.size() || shared_->closed; });
  if (cursor_ < shared_->events.size()) {
    return shared_->events[cursor_++];
  }
  return std::nullopt;
}

bool EventLog::Subscription::finished() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->closed && cursor_ >= shared_->events.size();
}

}  // namespace chamber
