#pragma once

#include <array>
#include <string>
#include <string_view>

#include "svs/domain.hpp"

namespace svs {

struct PushNotification {
  std::string title;
  std::string message;
  TimestampMs ts_ms = 0;
  std::string camera_id;

  void validate() const;
  friend bool operator==(const PushNotification&, const PushNotification&) = default;
};

inline constexpr std::array<std::string_view, 4> kPushNotificationKeys = {"title", "message", "ts_ms", "camera_id"};

Json to_json(const PushNotification& n);
PushNotification notification_from_json(const Json& doc);

}  // namespace svs
