#pragma once

// Synthetic detector output: walkers moving at constant velocity inside the
// image with reflective bounds, each carrying a persistent identity feature.
// Stands in for live cameras plus detector, tracker features and pose.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svs/domain.hpp"
#include "svs/error.hpp"

namespace svs {

struct AnomalyInjection {
  double time_s = 0.0;
  AnomalyKind kind = AnomalyKind::Behavioral;
  std::string category;
  double score = 0.0;
  double duration_s = 1.0;
  std::string camera_id;  // empty: first camera
  // Statistical injections add this many extra walkers for the duration.
  std::size_t extra_people = 0;
};

struct WalkerModel {
  double speed = 40.0;            // px/s
  double mean_lifetime_s = 8.0;   // exponential; a departing walker is replaced at once
  double image_width = 1920.0;
  double image_height = 1080.0;
  double feature_noise = 0.05;    // norm of the per-frame feature perturbation
  double reappear_probability = 0.3;  // a replacement reuses an identity seen before
  std::size_t max_people = 400;   // per frame and camera
  double duty_period_s = 10.0;    // cycle of the fractional walker slot
  double base_score_max = 15.0;   // normal frames score uniformly in [0, this]
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration_s = 60.0;
  double fps = 30.0;
  double target_density = 70.0;  // person detections per second, per camera
  TimestampMs start_ms = 1'700'000'000'000;
  std::size_t feature_dim = kDefaultFeatureDim;
  std::vector<CameraConfig> cameras;
  std::vector<AnomalyInjection> anomaly_injections;
  WalkerModel walkers;

  // Throws ConfigError.
  void validate() const;
  std::size_t frames_per_camera() const;
  double people_per_frame() const { return target_density / fps; }
};

// One camera at location "loc-1" whose image maps onto a 19.2 x 10.8 m floor.
CameraConfig default_camera(std::string camera_id = "cam-1", std::string location_id = "loc-1");

Json to_json(const ScenarioConfig& cfg);
// Missing fields take their defaults; no cameras means one default camera.
ScenarioConfig scenario_from_json(const Json& doc);
ScenarioConfig load_scenario(const std::string& path);

struct ScenarioStats {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t anomalous_frames = 0;
  double detections_per_second = 0.0;  // per camera
};

// Writes one trace line per frame, frames of all cameras interleaved by time
// then camera order. When `labels` is given, writes one 0/1 line per frame
// in the same order (1 for frames inside a behavioral injection).
ScenarioStats generate_scenario(const ScenarioConfig& cfg, std::ostream& trace, std::ostream* labels = nullptr);

}  // namespace svs
