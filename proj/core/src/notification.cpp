#include "svs/notification.hpp"

#include "svs/error.hpp"

namespace svs {

void PushNotification::validate() const {
  if (title.empty()) throw ValidationError("notification title must be non-empty");
  if (message.empty()) throw ValidationError("notification message must be non-empty");
}

Json to_json(const PushNotification& n) {
  return Json{{"title", n.title}, {"message", n.message}, {"ts_ms", n.ts_ms}, {"camera_id", n.camera_id}};
}

PushNotification notification_from_json(const Json& doc) {
  require_allowed_keys(doc, std::span<const std::string_view>(kPushNotificationKeys), "notification");
  PushNotification n;
  n.title = doc.at("title").get<std::string>();
  n.message = doc.at("message").get<std::string>();
  n.ts_ms = doc.at("ts_ms").get<TimestampMs>();
  n.camera_id = doc.value("camera_id", std::string{});
  n.validate();
  return n;
}

}  // namespace svs
