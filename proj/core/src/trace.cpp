#include "svs/trace.hpp"

#include <array>
#include <cmath>

#include "svs/error.hpp"

namespace svs {
namespace {

constexpr std::array<std::string_view, 7> kFrameKeys = {
    "frame", "ts_ms", "camera_id", "detections", "frame_anomaly_score", "actions", "objects"};
constexpr std::array<std::string_view, 5> kDetectionKeys = {"class", "conf", "tlwh", "pose", "feature"};

// Walks the whole document so a forbidden key is reported as a privacy
// rejection no matter how deep it is nested.
void reject_forbidden_keys(const Json& doc) {
  if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      if (is_forbidden_key(key)) throw PrivacyError("privacy rejection: key '" + key + "' is not permitted");
      reject_forbidden_keys(value);
    }
  } else if (doc.is_array()) {
    for (const auto& v : doc) reject_forbidden_keys(v);
  }
}

double number(const Json& v, const char* what) {
  if (!v.is_number()) throw ValidationError(std::string(what) + " must be a number");
  return v.get<double>();
}

std::vector<std::string> string_list(const Json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) return {};
  if (!it->is_array()) throw ValidationError(std::string(key) + " must be an array of strings");
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) throw ValidationError(std::string(key) + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Detection decode_detection(const Json& doc, std::size_t feature_dim) {
  if (!doc.is_object()) throw ValidationError("detection must be an object");
  require_allowed_keys(doc, std::span<const std::string_view>(kDetectionKeys), "detection");
  Detection d;
  if (!doc.contains("class") || !doc["class"].is_string()) throw ValidationError("detection needs a string 'class'");
  d.cls = doc["class"].get<std::string>();
  if (!doc.contains("conf")) throw ValidationError("detection needs 'conf'");
  d.conf = number(doc["conf"], "conf");
  const auto& tlwh = doc.contains("tlwh") ? doc["tlwh"] : Json();
  if (!tlwh.is_array() || tlwh.size() != 4) throw ValidationError("tlwh must be [x, y, w, h]");
  d.bbox = {number(tlwh[0], "tlwh"), number(tlwh[1], "tlwh"), number(tlwh[2], "tlwh"), number(tlwh[3], "tlwh")};
  if (auto it = doc.find("pose"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != kPoseKeypoints) throw ValidationError("pose must have 17 keypoints");
    Pose pose;
    for (std::size_t i = 0; i < kPoseKeypoints; ++i) {
      const auto& kp = (*it)[i];
      if (!kp.is_array() || kp.size() != 3) throw ValidationError("keypoint must be [x, y, conf]");
      pose.keypoints[i] = {number(kp[0], "keypoint"), number(kp[1], "keypoint"), number(kp[2], "keypoint")};
    }
    d.pose = pose;
  }
  if (auto it = doc.find("feature"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("feature must be an array of numbers");
    FeatureVector f;
    f.values.reserve(it->size());
    for (const auto& v : *it) f.values.push_back(number(v, "feature value"));
    d.feature = std::move(f);
  }
  d.validate(feature_dim);
  return d;
}

template <typename E>
[[noreturn]] void rethrow_with_line(const E& err, std::size_t line) {
  throw E("line " + std::to_string(line) + ": " + err.what());
}

}  // namespace

TraceReader::TraceReader(std::istream& in, TraceOptions options) : in_(in), options_(options) {}

std::optional<FrameObservation> TraceReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_;
    if (buffer_.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json doc = Json::parse(buffer_, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ParseError("malformed trace record", line_);
    FrameObservation obs;
    try {
      obs = decode(doc);
    } catch (const PrivacyError& e) {
      rethrow_with_line(e, line_);
    } catch (const ValidationError& e) {
      rethrow_with_line(e, line_);
    }
    auto it = cursors_.find(obs.camera_id);
    if (it != cursors_.end()) {
      if (obs.frame_index <= it->second.frame_index) {
        throw OrderingError("line " + std::to_string(line_) + ": frame index " + std::to_string(obs.frame_index) +
                            " does not increase for camera '" + obs.camera_id + "'");
      }
      if (obs.record_time < it->second.record_time) {
        throw OrderingError("line " + std::to_string(line_) + ": ts_ms decreases for camera '" + obs.camera_id + "'");
      }
      it->second = {obs.frame_index, obs.record_time};
    } else {
      cursors_.emplace(obs.camera_id, CameraCursor{obs.frame_index, obs.record_time});
    }
    return obs;
  }
  return std::nullopt;
}

FrameObservation TraceReader::decode(const Json& doc) const {
  reject_forbidden_keys(doc);
  require_allowed_keys(doc, std::span<const std::string_view>(kFrameKeys), "trace record");
  FrameObservation obs;
  if (!doc.contains("frame") || !doc["frame"].is_number_unsigned()) {
    throw ValidationError("'frame' must be a non-negative integer");
  }
  obs.frame_index = doc["frame"].get<std::uint64_t>();
  if (!doc.contains("ts_ms") || !doc["ts_ms"].is_number_integer()) throw ValidationError("'ts_ms' must be an integer");
  obs.record_time = doc["ts_ms"].get<TimestampMs>();
  if (!doc.contains("camera_id") || !doc["camera_id"].is_string()) throw ValidationError("'camera_id' must be a string");
  obs.camera_id = doc["camera_id"].get<std::string>();
  if (!doc.contains("detections") || !doc["detections"].is_array()) {
    throw ValidationError("'detections' must be an array");
  }
  obs.detections.reserve(doc["detections"].size());
  for (const auto& d : doc["detections"]) obs.detections.push_back(decode_detection(d, options_.feature_dim));
  if (auto it = doc.find("frame_anomaly_score"); it != doc.end()) {
    obs.frame_anomaly_score = number(*it, "frame_anomaly_score");
  }
  obs.actions = string_list(doc, "actions");
  obs.objects = string_list(doc, "objects");
  obs.validate(options_.feature_dim);
  return obs;
}

std::vector<FrameObservation> ingest_trace(std::istream& in, TraceOptions options) {
  TraceReader reader(in, options);
  std::vector<FrameObservation> out;
  while (auto obs = reader.next()) out.push_back(std::move(*obs));
  return out;
}

Json to_trace_json(const FrameObservation& obs) {
  Json dets = Json::array();
  for (const auto& d : obs.detections) {
    Json jd{{"class", d.cls}, {"conf", d.conf}, {"tlwh", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}};
    if (d.pose) {
      Json kps = Json::array();
      for (const auto& kp : d.pose->keypoints) kps.push_back({kp.x, kp.y, kp.conf});
      jd["pose"] = std::move(kps);
    }
    if (d.feature) jd["feature"] = d.feature->values;
    dets.push_back(std::move(jd));
  }
  return Json{{"frame", obs.frame_index},
              {"ts_ms", obs.record_time},
              {"camera_id", obs.camera_id},
              {"detections", std::move(dets)},
              {"frame_anomaly_score", obs.frame_anomaly_score},
              {"actions", obs.actions},
              {"objects", obs.objects}};
}

std::string serialize_observation(const FrameObservation& obs) { return to_trace_json(obs).dump(); }

}  // namespace svs
