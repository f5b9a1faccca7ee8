#include "svs/api/events.hpp"

#include <algorithm>

namespace svs::api {

std::string format_sse(const StreamEvent& event) {
  return "id: " + std::to_string(event.id) + "\nevent: notification\ndata: " + to_json(event.notification).dump() +
         "\n\n";
}

EventBroadcaster::EventBroadcaster(std::size_t history_capacity, std::size_t client_buffer)
    : history_capacity_(history_capacity), client_buffer_(client_buffer == 0 ? 1 : client_buffer) {}

std::uint64_t EventBroadcaster::publish(PushNotification notification) {
  notification.validate();
  std::lock_guard lock(mutex_);
  StreamEvent ev{next_id_++, std::move(notification)};
  history_.push_back(ev);
  while (history_.size() > history_capacity_) history_.pop_front();
  for (auto& sub : subscribers_) {
    if (!sub->queue_.try_push(ev)) {
      sub->overflowed_ = true;
      sub->queue_.close();
      ++dropped_;
    }
  }
  std::erase_if(subscribers_, [](const auto& s) { return s->queue_.closed(); });
  return ev.id;
}

std::shared_ptr<Subscription> EventBroadcaster::subscribe(std::optional<std::uint64_t> last_event_id) {
  std::lock_guard lock(mutex_);
  std::size_t replay = 0;
  if (last_event_id) {
    replay = static_cast<std::size_t>(std::count_if(history_.begin(), history_.end(),
                                                    [&](const StreamEvent& e) { return e.id > *last_event_id; }));
  }
  auto sub = std::make_shared<Subscription>(std::max(client_buffer_, replay + client_buffer_));
  if (last_event_id) {
    for (const auto& e : history_) {
      if (e.id > *last_event_id) sub->queue_.try_push(e);
    }
  }
  if (shut_down_) {
    sub->queue_.close();
  } else {
    subscribers_.push_back(sub);
  }
  return sub;
}

void EventBroadcaster::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(mutex_);
  std::erase(subscribers_, sub);
  sub->queue_.close();
}

void EventBroadcaster::shutdown() {
  std::lock_guard lock(mutex_);
  shut_down_ = true;
  for (auto& s : subscribers_) s->queue_.close();
  subscribers_.clear();
}

std::uint64_t EventBroadcaster::last_id() const {
  std::lock_guard lock(mutex_);
  return next_id_ - 1;
}

std::size_t EventBroadcaster::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return subscribers_.size();
}

std::size_t EventBroadcaster::dropped_count() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

}  // namespace svs::api
