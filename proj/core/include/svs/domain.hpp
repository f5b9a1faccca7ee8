#pragma once

// Shared vocabulary of the surveillance stack. Nothing in here can hold pixel
// data: detections are boxes, keypoints and feature vectors only.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace svs {

using Json = nlohmann::json;

// UTC epoch milliseconds.
using TimestampMs = std::int64_t;
using GlobalId = std::uint64_t;
using LocalId = std::uint64_t;

inline constexpr TimestampMs kMsPerSecond = 1000;
inline constexpr TimestampMs kMsPerHour = 3'600'000;
inline constexpr TimestampMs kMsPerDay = 24 * kMsPerHour;

inline constexpr std::size_t kDefaultFeatureDim = 512;
inline constexpr std::size_t kPoseKeypoints = 17;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct BBoxTlwh {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  // Throws ValidationError unless all fields are finite and w, h > 0.
  void validate() const;
  bool valid() const noexcept;
  double area() const noexcept { return w * h; }

  friend bool operator==(const BBoxTlwh&, const BBoxTlwh&) = default;
};

struct BoxCorners {
  Point2 top_left;
  Point2 top_right;
  Point2 bottom_left;
  Point2 bottom_right;
};

BoxCorners bbox_corners(const BBoxTlwh& box);

// Bottom-center of the box; the ground-contact point used for BEV projection.
Point2 bbox_foot_point(const BBoxTlwh& box);

// Intersection over union, symmetric, in [0, 1].
double bbox_iou(const BBoxTlwh& a, const BBoxTlwh& b);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double conf = 0.0;
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// COCO-ordered 17 keypoint skeleton.
struct Pose {
  std::array<Keypoint, kPoseKeypoints> keypoints{};

  void validate() const;
  double mean_confidence() const noexcept;
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::uint64_t epoch_id = 0;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const noexcept;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

struct Detection {
  std::string cls;
  double conf = 0.0;
  BBoxTlwh bbox;
  std::optional<Pose> pose;
  std::optional<FeatureVector> feature;

  void validate(std::size_t feature_dim) const;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct FrameObservation {
  std::string camera_id;
  std::uint64_t frame_index = 0;
  TimestampMs record_time = 0;
  std::vector<Detection> detections;
  double frame_anomaly_score = 0.0;
  std::vector<std::string> actions;
  std::vector<std::string> objects;

  void validate(std::size_t feature_dim) const;
  friend bool operator==(const FrameObservation&, const FrameObservation&) = default;
};

// One persisted row of the centralized store. Its serialized form has
// exactly seven keys; see kGlobalRecordKeys.
struct GlobalRecord {
  GlobalId global_id = 0;
  TimestampMs record_time = 0;
  std::string camera_id;
  BBoxTlwh bbox_tlwh;
  double anomaly_score = 0.0;
  std::vector<std::string> actions;
  std::vector<std::string> objects;

  void validate() const;
  friend bool operator==(const GlobalRecord&, const GlobalRecord&) = default;
};

inline constexpr std::array<std::string_view, 7> kGlobalRecordKeys = {
    "global_id", "record_time", "camera_id", "bbox_tlwh", "anomaly_score", "actions", "objects"};

Json to_json(const GlobalRecord& record);
// Strict: rejects missing keys, extra keys and out-of-range values.
GlobalRecord record_from_json(const Json& doc);
std::string serialize_record(const GlobalRecord& record);
GlobalRecord parse_record(std::string_view line);

// Row-major 3x3 matrix mapping image coordinates to the BEV plane.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 3 + col)]; }
  double determinant() const noexcept;
  // Throws ValidationError when |det| of the matrix scaled to unit max-abs entry <= 1e-9.
  void validate() const;
  Homography inverse() const;
  friend bool operator==(const Homography&, const Homography&) = default;
};

struct BevExtent {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  void validate() const;
  friend bool operator==(const BevExtent&, const BevExtent&) = default;
};

struct CameraConfig {
  std::string camera_id;
  std::string location_id;
  std::string display_name;
  Homography homography;
  BevExtent bev_extent;
  bool live = true;

  void validate() const;
  friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

Json to_json(const CameraConfig& camera);
CameraConfig camera_from_json(const Json& doc);
// Accepts either a bare array of cameras or {"cameras": [...]}.
std::vector<CameraConfig> parse_camera_configs(const Json& doc);
std::vector<CameraConfig> load_camera_configs(const std::string& path);

enum class AnomalyKind { Behavioral, Statistical };

std::string_view to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(std::string_view text);

struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::Behavioral;
  std::string category;  // empty for statistical events
  std::string camera_id;
  TimestampMs record_time = 0;
  double value = 0.0;  // frame score (behavioral) or occupancy count (statistical)
  std::string message;

  friend bool operator==(const AnomalyEvent&, const AnomalyEvent&) = default;
};

inline constexpr std::array<std::string_view, 6> kAnomalyEventKeys = {
    "kind", "category", "camera_id", "ts_ms", "value", "message"};

Json to_json(const AnomalyEvent& event);
AnomalyEvent anomaly_from_json(const Json& doc);

// Throws PrivacyError naming the first key of `doc` not in `allowed`.
void require_allowed_keys(const Json& doc, std::span<const std::string_view> allowed,
                          std::string_view context);
void require_allowed_keys(const Json& doc, std::initializer_list<std::string_view> allowed,
                          std::string_view context);

// Keys that may never appear in any payload because they would carry imagery
// or direct identifiers.
bool is_forbidden_key(std::string_view key);

}  // namespace svs
