#include "svs/api/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace svs::api {

const std::vector<std::string_view>& response_keys() {
  static const std::vector<std::string_view> keys = {
      "locations", "location_id", "camera_count", "cameras",  "camera_id",     "display_name", "live",
      "available", "count",       "ts_ms",        "indicator", "deduplicated", "from",         "to",
      "events",    "kind",        "category",     "value",     "message",      "result",       "total",
      "average",   "max",         "min",          "most_frequent", "samples",  "version",      "cols",
      "rows",      "extent",      "cells",        "discarded", "points",       "title",        "token",
      "user",      "user_id",     "first_name",   "last_name", "email",        "error"};
  return keys;
}

void check_response(const Json& doc) {
  if (doc.is_array()) {
    for (const auto& v : doc) check_response(v);
    return;
  }
  if (!doc.is_object()) return;
  const auto& keys = response_keys();
  for (const auto& [k, v] : doc.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw PrivacyError("response field '" + k + "' is not allow-listed");
    }
    check_response(v);
  }
}

TimestampMs system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

Json checked(Json doc) {
  check_response(doc);
  return doc;
}

}  // namespace

ApiService::ApiService(std::vector<CameraConfig> cameras, const gateway::KvStore& store, ApiTables tables,
                       Clock clock)
    : cameras_(std::move(cameras)), store_(store), tables_(std::move(tables)), clock_(std::move(clock)) {
  for (const auto& c : cameras_) c.validate();
}

const CameraConfig& ApiService::camera(const std::string& camera_id) const {
  for (const auto& c : cameras_) {
    if (c.camera_id == camera_id) return c;
  }
  throw NotFoundError("unknown camera '" + camera_id + "'");
}

std::vector<const CameraConfig*> ApiService::cameras_at(const std::string& location_id) const {
  std::vector<const CameraConfig*> out;
  for (const auto& c : cameras_) {
    if (c.location_id == location_id) out.push_back(&c);
  }
  if (out.empty()) throw NotFoundError("unknown location '" + location_id + "'");
  return out;
}

Json ApiService::list_locations() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : cameras_) ++counts[c.location_id];
  Json list = Json::array();
  for (const auto& [loc, n] : counts) list.push_back({{"location_id", loc}, {"camera_count", n}});
  return checked({{"locations", std::move(list)}});
}

Json ApiService::list_cameras(const std::string& location_id) const {
  Json list = Json::array();
  for (const auto* c : cameras_at(location_id)) {
    list.push_back({{"camera_id", c->camera_id}, {"display_name", c->display_name}, {"live", c->live}});
  }
  return checked({{"location_id", location_id}, {"cameras", std::move(list)}});
}

Json ApiService::status_of(const CameraConfig& cam) const {
  auto row = store_.latest(tables_.counts, cam.camera_id);
  if (!row) return Json{{"camera_id", cam.camera_id}, {"available", false}};
  std::string indicator(to_string(OccupancyIndicator::Unknown));
  auto analytics = store_.get(tables_.analytics, row->key);
  if (!analytics) {
    if (auto last = store_.latest(tables_.analytics, cam.camera_id)) analytics = last->value;
  }
  if (analytics && analytics->contains("indicator")) indicator = analytics->at("indicator").get<std::string>();
  return Json{{"camera_id", cam.camera_id},
              {"available", true},
              {"count", row->value.at("count").get<std::uint64_t>()},
              {"ts_ms", row->key.ts_ms},
              {"indicator", indicator}};
}

Json ApiService::current_status(const std::string& camera_id) const { return checked(status_of(camera(camera_id))); }

Json ApiService::location_status(const std::string& location_id) const {
  Json per_camera = Json::array();
  std::uint64_t total = 0;
  bool any = false;
  for (const auto* c : cameras_at(location_id)) {
    Json s = status_of(*c);
    if (s.at("available").get<bool>()) {
      total += s.at("count").get<std::uint64_t>();
      any = true;
    }
    per_camera.push_back(std::move(s));
  }
  Json doc{{"location_id", location_id}, {"available", any}, {"deduplicated", false}, {"cameras", per_camera}};
  if (any) doc["count"] = total;
  return checked(std::move(doc));
}

std::vector<AnomalyEvent> ApiService::events_of(const std::string& camera_id, TimestampMs from,
                                                TimestampMs to) const {
  std::vector<AnomalyEvent> out;
  for (const auto& table : tables_.anomalies) {
    if (!store_.has_table(table)) continue;
    for (auto& row : store_.range(table, camera_id, from, to)) out.push_back(anomaly_from_json(row.value));
  }
  return out;
}

namespace {

Json anomaly_response(std::vector<AnomalyEvent> events, TimestampMs from, TimestampMs to) {
  std::sort(events.begin(), events.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    if (a.record_time != b.record_time) return a.record_time > b.record_time;
    if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
    return a.kind < b.kind;
  });
  Json list = Json::array();
  for (const auto& e : events) list.push_back(to_json(e));
  return Json{{"from", from}, {"to", to}, {"events", std::move(list)}};
}

}  // namespace

Json ApiService::camera_anomalies(const std::string& camera_id, TimestampMs window_ms) const {
  if (window_ms < 0) throw ValidationError("anomaly window must be non-negative");
  camera(camera_id);
  const TimestampMs now = clock_();
  Json doc = anomaly_response(events_of(camera_id, now - window_ms, now), now - window_ms, now);
  doc["camera_id"] = camera_id;
  return checked(std::move(doc));
}

Json ApiService::location_anomalies(const std::string& location_id, TimestampMs window_ms) const {
  if (window_ms < 0) throw ValidationError("anomaly window must be non-negative");
  const TimestampMs now = clock_();
  std::vector<AnomalyEvent> all;
  for (const auto* c : cameras_at(location_id)) {
    auto e = events_of(c->camera_id, now - window_ms, now);
    all.insert(all.end(), e.begin(), e.end());
  }
  Json doc = anomaly_response(std::move(all), now - window_ms, now);
  doc["location_id"] = location_id;
  return checked(std::move(doc));
}

std::optional<SearchResult> ApiService::search_result(const std::string& camera_id, TimestampMs t0,
                                                      TimestampMs t1) const {
  if (t0 > t1) throw ValidationError("search window start is after its end");
  camera(camera_id);
  std::vector<OccupancySample> samples;
  for (const auto& row : store_.range(tables_.counts, camera_id, t0, t1)) {
    samples.push_back({camera_id, row.key.ts_ms, row.value.at("count").get<std::uint64_t>()});
  }
  return search_aggregate(samples, t0, t1);
}

Json ApiService::search(const std::string& camera_id, TimestampMs t0, TimestampMs t1) const {
  auto r = search_result(camera_id, t0, t1);
  return checked({{"camera_id", camera_id}, {"from", t0}, {"to", t1}, {"result", r ? to_json(*r) : Json(nullptr)}});
}

Json ApiService::heatmap(const std::string& camera_id) const {
  const auto& cam = camera(camera_id);
  if (auto row = store_.latest(tables_.heatmaps, camera_id)) return checked(row->value);
  const auto& e = cam.bev_extent;
  return checked({{"camera_id", camera_id},
                  {"ts_ms", nullptr},
                  {"version", 0},
                  {"cols", 0},
                  {"rows", 0},
                  {"extent", {e.x_min, e.y_min, e.x_max, e.y_max}},
                  {"cells", Json::array()},
                  {"discarded", 0}});
}

Json ApiService::bev_snapshot(const std::string& camera_id) const {
  camera(camera_id);
  auto row = store_.latest(tables_.analytics, camera_id);
  if (!row) return checked({{"camera_id", camera_id}, {"ts_ms", nullptr}, {"points", Json::array()}});
  return checked({{"camera_id", camera_id}, {"ts_ms", row->key.ts_ms}, {"points", row->value.at("bev_points")}});
}

Json to_json(const SessionUser& user) {
  return Json{{"user_id", user.user_id},
              {"first_name", user.first_name},
              {"last_name", user.last_name},
              {"email", user.email}};
}

UserRegistry::UserRegistry() : rng_(std::random_device{}()) {}

void UserRegistry::add_user(SessionUser user, std::string password) {
  if (user.email.empty() || password.empty()) throw ValidationError("user needs an email and a password");
  std::lock_guard lock(mutex_);
  const std::string email = user.email;
  accounts_[email] = Account{std::move(user), std::move(password)};
}

std::optional<std::string> UserRegistry::login(const std::string& email, const std::string& password) {
  std::lock_guard lock(mutex_);
  auto it = accounts_.find(email);
  if (it == accounts_.end() || it->second.password != password) return std::nullopt;
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                static_cast<unsigned long long>(rng_()));
  sessions_[buf] = email;
  return std::string(buf);
}

std::optional<SessionUser> UserRegistry::authenticate(const std::string& token) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) return std::nullopt;
  return accounts_.at(it->second).user;
}

void UserRegistry::logout(const std::string& token) {
  std::lock_guard lock(mutex_);
  sessions_.erase(token);
}

}  // namespace svs::api
