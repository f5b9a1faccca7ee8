#include "svs/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "svs/error.hpp"

namespace svs {
namespace {

bool finite(double v) { return std::isfinite(v); }

void require_finite(double v, std::string_view what) {
  if (!finite(v)) throw ValidationError(std::string(what) + " must be finite");
}

template <typename T>
T get_field(const Json& doc, const char* key, std::string_view context) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw ValidationError(std::string(context) + ": missing key '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(context) + ": key '" + key + "' has the wrong type");
  }
}

BBoxTlwh bbox_from_json(const Json& doc, std::string_view context) {
  if (!doc.is_array() || doc.size() != 4) {
    throw ValidationError(std::string(context) + ": bbox must be [x, y, w, h]");
  }
  for (const auto& v : doc) {
    if (!v.is_number()) throw ValidationError(std::string(context) + ": bbox entries must be numbers");
  }
  BBoxTlwh box{doc[0].get<double>(), doc[1].get<double>(), doc[2].get<double>(), doc[3].get<double>()};
  box.validate();
  return box;
}

}  // namespace

void BBoxTlwh::validate() const {
  require_finite(x, "bbox x");
  require_finite(y, "bbox y");
  require_finite(w, "bbox w");
  require_finite(h, "bbox h");
  if (w <= 0.0 || h <= 0.0) throw ValidationError("bbox width and height must be positive");
}

bool BBoxTlwh::valid() const noexcept {
  return finite(x) && finite(y) && finite(w) && finite(h) && w > 0.0 && h > 0.0;
}

BoxCorners bbox_corners(const BBoxTlwh& box) {
  box.validate();
  return {{box.x, box.y}, {box.x + box.w, box.y}, {box.x, box.y + box.h}, {box.x + box.w, box.y + box.h}};
}

Point2 bbox_foot_point(const BBoxTlwh& box) {
  box.validate();
  return {box.x + box.w / 2.0, box.y + box.h};
}

double bbox_iou(const BBoxTlwh& a, const BBoxTlwh& b) {
  a.validate();
  b.validate();
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

void Pose::validate() const {
  for (const auto& kp : keypoints) {
    require_finite(kp.x, "keypoint x");
    require_finite(kp.y, "keypoint y");
    if (!(kp.conf >= 0.0 && kp.conf <= 1.0)) throw ValidationError("keypoint confidence outside [0, 1]");
  }
}

double Pose::mean_confidence() const noexcept {
  double sum = 0.0;
  for (const auto& kp : keypoints) sum += kp.conf;
  return sum / static_cast<double>(keypoints.size());
}

double FeatureVector::norm() const noexcept {
  return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim()) throw ValidationError("cosine similarity of vectors with different dimensions");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double dot = std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

void Detection::validate(std::size_t feature_dim) const {
  if (!(conf >= 0.0 && conf <= 1.0)) throw ValidationError("detection confidence outside [0, 1]");
  bbox.validate();
  if (pose) pose->validate();
  if (feature) {
    if (feature->dim() != feature_dim) {
      throw ValidationError("feature has dimension " + std::to_string(feature->dim()) + ", expected " +
                            std::to_string(feature_dim));
    }
    for (double v : feature->values) require_finite(v, "feature value");
  }
}

void FrameObservation::validate(std::size_t feature_dim) const {
  if (camera_id.empty()) throw ValidationError("camera_id must be non-empty");
  if (!(frame_anomaly_score >= 0.0 && frame_anomaly_score <= 100.0)) {
    throw ValidationError("frame_anomaly_score outside [0, 100]");
  }
  for (const auto& d : detections) d.validate(feature_dim);
}

void GlobalRecord::validate() const {
  if (global_id == 0) throw ValidationError("global_id must be positive");
  if (camera_id.empty()) throw ValidationError("camera_id must be non-empty");
  bbox_tlwh.validate();
  if (!(anomaly_score >= 0.0 && anomaly_score <= 100.0)) throw ValidationError("anomaly_score outside [0, 100]");
}

Json to_json(const GlobalRecord& record) {
  return Json{{"global_id", record.global_id},
              {"record_time", record.record_time},
              {"camera_id", record.camera_id},
              {"bbox_tlwh", {record.bbox_tlwh.x, record.bbox_tlwh.y, record.bbox_tlwh.w, record.bbox_tlwh.h}},
              {"anomaly_score", record.anomaly_score},
              {"actions", record.actions},
              {"objects", record.objects}};
}

GlobalRecord record_from_json(const Json& doc) {
  constexpr std::string_view ctx = "global record";
  if (!doc.is_object()) throw ValidationError("global record must be an object");
  require_allowed_keys(doc, std::span<const std::string_view>(kGlobalRecordKeys), ctx);
  GlobalRecord r;
  r.global_id = get_field<GlobalId>(doc, "global_id", ctx);
  r.record_time = get_field<TimestampMs>(doc, "record_time", ctx);
  r.camera_id = get_field<std::string>(doc, "camera_id", ctx);
  if (!doc.contains("bbox_tlwh")) throw ValidationError("global record: missing key 'bbox_tlwh'");
  r.bbox_tlwh = bbox_from_json(doc.at("bbox_tlwh"), ctx);
  r.anomaly_score = get_field<double>(doc, "anomaly_score", ctx);
  r.actions = get_field<std::vector<std::string>>(doc, "actions", ctx);
  r.objects = get_field<std::vector<std::string>>(doc, "objects", ctx);
  r.validate();
  return r;
}

std::string serialize_record(const GlobalRecord& record) {
  record.validate();
  return to_json(record).dump();
}

GlobalRecord parse_record(std::string_view line) {
  Json doc = Json::parse(line.begin(), line.end(), nullptr, false);
  if (doc.is_discarded()) throw ParseError("global record is not valid JSON", 0);
  return record_from_json(doc);
}

double Homography::determinant() const noexcept {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void Homography::validate() const {
  double scale = 0.0;
  for (double v : m) {
    require_finite(v, "homography entry");
    scale = std::max(scale, std::abs(v));
  }
  if (scale == 0.0) throw ValidationError("homography is the zero matrix");
  // det scales with the cube of a uniform factor.
  const double det = determinant() / (scale * scale * scale);
  if (std::abs(det) <= 1e-9) throw ValidationError("homography is not invertible");
}

Homography Homography::inverse() const {
  validate();
  const double det = determinant();
  Homography inv;
  inv.m = {(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det, (m[1] * m[5] - m[2] * m[4]) / det,
           (m[5] * m[6] - m[3] * m[8]) / det, (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
           (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det, (m[0] * m[4] - m[1] * m[3]) / det};
  return inv;
}

void BevExtent::validate() const {
  require_finite(x_min, "bev_extent");
  require_finite(y_min, "bev_extent");
  require_finite(x_max, "bev_extent");
  require_finite(y_max, "bev_extent");
  if (!(x_min < x_max && y_min < y_max)) throw ValidationError("bev_extent must satisfy min < max");
}

void CameraConfig::validate() const {
  if (camera_id.empty()) throw ValidationError("camera_id must be non-empty");
  if (location_id.empty()) throw ValidationError("location_id must be non-empty");
  homography.validate();
  bev_extent.validate();
}

Json to_json(const CameraConfig& camera) {
  const auto& e = camera.bev_extent;
  return Json{{"camera_id", camera.camera_id},
              {"location_id", camera.location_id},
              {"display_name", camera.display_name},
              {"homography", camera.homography.m},
              {"bev_extent", {e.x_min, e.y_min, e.x_max, e.y_max}},
              {"live", camera.live}};
}

CameraConfig camera_from_json(const Json& doc) {
  constexpr std::string_view ctx = "camera config";
  if (!doc.is_object()) throw ConfigError("camera entry must be an object");
  try {
    require_allowed_keys(doc, {"camera_id", "location_id", "display_name", "homography", "bev_extent", "live"}, ctx);
    CameraConfig cam;
    cam.camera_id = get_field<std::string>(doc, "camera_id", ctx);
    cam.location_id = get_field<std::string>(doc, "location_id", ctx);
    cam.display_name = doc.value("display_name", cam.camera_id);
    auto h = get_field<std::vector<double>>(doc, "homography", ctx);
    if (h.size() != 9) throw ValidationError("homography must have nine entries");
    std::copy(h.begin(), h.end(), cam.homography.m.begin());
    auto e = get_field<std::vector<double>>(doc, "bev_extent", ctx);
    if (e.size() != 4) throw ValidationError("bev_extent must be [x_min, y_min, x_max, y_max]");
    cam.bev_extent = {e[0], e[1], e[2], e[3]};
    cam.live = doc.value("live", true);
    cam.validate();
    return cam;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
}

std::vector<CameraConfig> parse_camera_configs(const Json& doc) {
  const Json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("cameras")) throw ConfigError("camera file needs a 'cameras' array");
    list = &doc.at("cameras");
  }
  if (!list->is_array()) throw ConfigError("cameras must be an array");
  std::vector<CameraConfig> out;
  for (const auto& entry : *list) {
    auto cam = camera_from_json(entry);
    auto dup = std::find_if(out.begin(), out.end(), [&](const auto& c) { return c.camera_id == cam.camera_id; });
    if (dup != out.end()) throw ConfigError("duplicate camera_id '" + cam.camera_id + "'");
    out.push_back(std::move(cam));
  }
  return out;
}

std::vector<CameraConfig> load_camera_configs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open camera config '" + path + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("camera config '" + path + "' is not valid JSON");
  return parse_camera_configs(doc);
}

std::string_view to_string(AnomalyKind kind) {
  return kind == AnomalyKind::Behavioral ? "Behavioral" : "Statistical";
}

AnomalyKind anomaly_kind_from_string(std::string_view text) {
  if (text == "Behavioral") return AnomalyKind::Behavioral;
  if (text == "Statistical") return AnomalyKind::Statistical;
  throw ValidationError("unknown anomaly kind '" + std::string(text) + "'");
}

Json to_json(const AnomalyEvent& event) {
  return Json{{"kind", std::string(to_string(event.kind))},
              {"category", event.category},
              {"camera_id", event.camera_id},
              {"ts_ms", event.record_time},
              {"value", event.value},
              {"message", event.message}};
}

AnomalyEvent anomaly_from_json(const Json& doc) {
  constexpr std::string_view ctx = "anomaly event";
  require_allowed_keys(doc, std::span<const std::string_view>(kAnomalyEventKeys), ctx);
  AnomalyEvent e;
  e.kind = anomaly_kind_from_string(get_field<std::string>(doc, "kind", ctx));
  e.category = doc.value("category", std::string{});
  e.camera_id = get_field<std::string>(doc, "camera_id", ctx);
  e.record_time = get_field<TimestampMs>(doc, "ts_ms", ctx);
  e.value = get_field<double>(doc, "value", ctx);
  e.message = doc.value("message", std::string{});
  return e;
}

void require_allowed_keys(const Json& doc, std::span<const std::string_view> allowed, std::string_view context) {
  if (!doc.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw PrivacyError(std::string(context) + ": key '" + key + "' is not allow-listed");
    }
  }
}

void require_allowed_keys(const Json& doc, std::initializer_list<std::string_view> allowed,
                          std::string_view context) {
  require_allowed_keys(doc, std::span<const std::string_view>(allowed.begin(), allowed.size()), context);
}

bool is_forbidden_key(std::string_view key) {
  static constexpr std::array<std::string_view, 10> kForbidden = {
      "image", "frame_data", "pixels", "crop", "jpeg", "png", "thumbnail", "face", "face_id", "face_embedding"};
  return std::find(kForbidden.begin(), kForbidden.end(), key) != kForbidden.end();
}

}  // namespace svs
