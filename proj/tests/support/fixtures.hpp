#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "svs/domain.hpp"

namespace fixture {

inline svs::Pose pose_with(double conf) {
  svs::Pose p;
  for (std::size_t i = 0; i < svs::kPoseKeypoints; ++i) p.keypoints[i] = {static_cast<double>(i), 2.0 * i, conf};
  return p;
}

inline svs::FeatureVector unit_feature(std::size_t dim, std::size_t axis) {
  svs::FeatureVector f;
  f.values.assign(dim, 0.0);
  f.values[axis % dim] = 1.0;
  return f;
}

inline svs::FeatureVector random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  svs::FeatureVector f;
  f.values.resize(dim);
  double ss = 0;
  for (auto& v : f.values) {
    v = n(rng);
    ss += v * v;
  }
  for (auto& v : f.values) v /= std::sqrt(ss);
  return f;
}

inline svs::Detection person(svs::BBoxTlwh box, double conf = 0.9, std::optional<svs::FeatureVector> feature = {},
                             double pose_conf = 1.0) {
  svs::Detection d;
  d.cls = "person";
  d.conf = conf;
  d.bbox = box;
  d.pose = pose_with(pose_conf);
  d.feature = std::move(feature);
  return d;
}

inline svs::FrameObservation frame(std::string camera, std::uint64_t index, svs::TimestampMs ts,
                                   std::vector<svs::Detection> dets = {}, double score = 0.0) {
  svs::FrameObservation o;
  o.camera_id = std::move(camera);
  o.frame_index = index;
  o.record_time = ts;
  o.detections = std::move(dets);
  o.frame_anomaly_score = score;
  return o;
}

inline svs::CameraConfig camera(std::string id, std::string location, bool live = true) {
  svs::CameraConfig c;
  c.camera_id = id;
  c.location_id = std::move(location);
  c.display_name = "Camera " + id;
  c.homography.m = {0.01, 0, 0, 0, 0.01, 0, 0, 0, 1};
  c.bev_extent = {0, 0, 19.2, 10.8};
  c.live = live;
  return c;
}

// Every object key at any depth.
inline void collect_keys(const svs::Json& doc, std::set<std::string>& out) {
  if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      out.insert(it.key());
      collect_keys(it.value(), out);
    }
  } else if (doc.is_array()) {
    for (const auto& v : doc) collect_keys(v, out);
  }
}

inline std::set<std::string> keys_of(const svs::Json& doc) {
  std::set<std::string> out;
  collect_keys(doc, out);
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("svs-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
