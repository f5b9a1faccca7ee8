#pragma once

// Push fan-out. Every published notification gets a monotonically
// increasing id; subscribers may resume after a last-seen id, replaying
// from a bounded history. A subscriber whose buffer overflows is dropped
// instead of blocking the publisher.

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "svs/bounded_queue.hpp"
#include "svs/notification.hpp"

namespace svs::api {

struct StreamEvent {
  std::uint64_t id = 0;
  PushNotification notification;
};

// "id: <n>\nevent: notification\ndata: <json>\n\n"
std::string format_sse(const StreamEvent& event);

class Subscription {
 public:
  explicit Subscription(std::size_t buffer) : queue_(buffer) {}

  template <typename Rep, typename Period>
  std::optional<StreamEvent> next(std::chrono::duration<Rep, Period> timeout) {
    return queue_.pop_for(timeout);
  }
  // True once the broadcaster dropped this subscriber or shut down.
  bool closed() const { return queue_.closed(); }
  bool overflowed() const noexcept { return overflowed_; }

 private:
  friend class EventBroadcaster;
  BoundedQueue<StreamEvent> queue_;
  std::atomic<bool> overflowed_{false};
};

class EventBroadcaster {
 public:
  explicit EventBroadcaster(std::size_t history_capacity = 1024, std::size_t client_buffer = 256);

  std::uint64_t publish(PushNotification notification);
  // Replays history with id > last_event_id before live events.
  std::shared_ptr<Subscription> subscribe(std::optional<std::uint64_t> last_event_id = std::nullopt);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  void shutdown();

  std::uint64_t last_id() const;
  std::size_t subscriber_count() const;
  std::size_t dropped_count() const;

 private:
  mutable std::mutex mutex_;
  std::size_t history_capacity_;
  std::size_t client_buffer_;
  std::deque<StreamEvent> history_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::uint64_t next_id_ = 1;
  std::size_t dropped_ = 0;
  bool shut_down_ = false;
};

}  // namespace svs::api
