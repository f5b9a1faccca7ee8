#pragma once

// Read-only query layer over the KV store. Every method returns the exact
// response document an endpoint serves; documents are checked against the
// response allow-list before they leave this class.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "svs/analytics.hpp"
#include "svs/domain.hpp"
#include "svs/gateway/kv_store.hpp"

namespace svs::api {

struct ApiTables {
  std::string counts = "counts";
  std::string analytics = "analytics";
  std::string heatmaps = "heatmaps";
  std::vector<std::string> anomalies = {"behavioral_anomalies", "statistical_anomalies"};
};

// Every key any response may carry, at any depth.
const std::vector<std::string_view>& response_keys();
// Throws PrivacyError when `doc` holds a key outside response_keys().
void check_response(const Json& doc);

TimestampMs system_now_ms();

class ApiService {
 public:
  using Clock = std::function<TimestampMs()>;

  ApiService(std::vector<CameraConfig> cameras, const gateway::KvStore& store, ApiTables tables = {},
             Clock clock = system_now_ms);

  // {"locations": [{location_id, camera_count}]}
  Json list_locations() const;
  // {"location_id", "cameras": [{camera_id, display_name, live}]}
  Json list_cameras(const std::string& location_id) const;
  // {"camera_id", "available": false} or {"camera_id", "available": true, count, ts_ms, indicator}
  Json current_status(const std::string& camera_id) const;
  // Per-camera sum of the latest counts. Not deduplicated across cameras.
  Json location_status(const std::string& location_id) const;
  // {"from", "to", "events": [...]}, newest first, ts_ms in [now - window, now].
  Json camera_anomalies(const std::string& camera_id, TimestampMs window_ms = kMsPerDay) const;
  Json location_anomalies(const std::string& location_id, TimestampMs window_ms = kMsPerDay) const;
  // {"camera_id", "from", "to", "result": null | {total, average, max, min, most_frequent, samples}}
  Json search(const std::string& camera_id, TimestampMs t0, TimestampMs t1) const;
  std::optional<SearchResult> search_result(const std::string& camera_id, TimestampMs t0, TimestampMs t1) const;
  // Latest heat map export; an empty 0x0 grid before the first one.
  Json heatmap(const std::string& camera_id) const;
  // {"camera_id", "ts_ms", "points": [[x, y], ...]}
  Json bev_snapshot(const std::string& camera_id) const;

  const CameraConfig& camera(const std::string& camera_id) const;
  const std::vector<CameraConfig>& cameras() const noexcept { return cameras_; }

 private:
  std::vector<const CameraConfig*> cameras_at(const std::string& location_id) const;
  Json status_of(const CameraConfig& cam) const;
  std::vector<AnomalyEvent> events_of(const std::string& camera_id, TimestampMs from, TimestampMs to) const;

  std::vector<CameraConfig> cameras_;
  const gateway::KvStore& store_;
  ApiTables tables_;
  Clock clock_;
};

struct SessionUser {
  std::string user_id;
  std::string first_name;
  std::string last_name;
  std::string email;
};

Json to_json(const SessionUser& user);

// In-memory stub identity store with opaque bearer tokens.
class UserRegistry {
 public:
  UserRegistry();

  void add_user(SessionUser user, std::string password);
  // Token for valid credentials, nullopt otherwise.
  std::optional<std::string> login(const std::string& email, const std::string& password);
  std::optional<SessionUser> authenticate(const std::string& token) const;
  void logout(const std::string& token);

 private:
  struct Account {
    SessionUser user;
    std::string password;
  };
  mutable std::mutex mutex_;
  std::map<std::string, Account> accounts_;  // by email
  std::map<std::string, std::string> sessions_;  // token -> email
  std::mt19937_64 rng_;
};

}  // namespace svs::api
