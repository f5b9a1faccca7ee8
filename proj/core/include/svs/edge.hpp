#pragma once

// Local node: pedestrian filtering, greedy IoU tracking, best-representation
// selection and windowed batching towards the global node.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svs/domain.hpp"

namespace svs {

struct EdgeConfig {
  double detection_floor = 0.3;
  double iou_threshold = 0.3;
  std::uint64_t max_age_frames = 30;
  TimestampMs window_ms = 1000;
  std::size_t feature_dim = kDefaultFeatureDim;

  void validate() const;
};

// Person detections at or above the confidence floor, in input order.
std::vector<Detection> filter_pedestrians(const FrameObservation& obs, double detection_floor);

// conf x mean keypoint confidence; 0 when the detection has no pose.
double quality_score(const Detection& d);

struct TrackEntry {
  std::uint64_t frame_index = 0;
  TimestampMs record_time = 0;
  Detection detection;
  double quality = 0.0;
};

struct Tracklet {
  LocalId local_id = 0;
  std::string camera_id;
  BBoxTlwh last_bbox;
  std::uint64_t last_seen_frame = 0;
  // Entries not yet handed to the global node, ordered by frame_index.
  std::vector<TrackEntry> history;
  // Highest-quality entry over the whole life of the track (later frame wins ties).
  TrackEntry best;
  // Most recent entry carrying a feature; used when `best` has none.
  std::optional<TrackEntry> last_with_feature;
  std::uint64_t observations = 0;

  void observe(TrackEntry entry);
};

// Argmax of quality over the tracklet's history, ties to the later frame.
// Throws ValidationError on an empty history.
const Detection& select_best_representation(const Tracklet& t);

struct AssociationResult {
  // local_ids[i] is the id assigned to dets[i].
  std::vector<LocalId> local_ids;
  std::vector<Tracklet> retired;
};

// Greedy association by descending IoU against each tracklet's last box.
// Updates `active` in place, issues ids from `next_local_id`, and moves
// tracklets unseen for more than max_age frames into the result.
AssociationResult associate_tracks(std::vector<Tracklet>& active, std::span<const Detection> dets,
                                   std::uint64_t frame_index, TimestampMs record_time, const std::string& camera_id,
                                   LocalId& next_local_id, const EdgeConfig& config);

struct TimeWindow {
  TimestampMs start = 0;  // inclusive
  TimestampMs end = 0;    // exclusive

  bool contains(TimestampMs t) const noexcept { return t >= start && t < end; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// Start of the `len`-aligned window holding `t` (floor, also for negative t).
TimestampMs window_floor(TimestampMs t, TimestampMs len);

struct BatchEntry {
  LocalId local_id = 0;
  Detection best;
  std::optional<FeatureVector> feature;  // raw, not anonymized
  TimestampMs record_time = 0;           // latest sighting inside the window
  BBoxTlwh bbox_tlwh;                    // box at that sighting
};

struct FrameSummary {
  std::uint64_t frame_index = 0;
  TimestampMs record_time = 0;
  double anomaly_score = 0.0;
  std::vector<std::string> actions;
  std::vector<std::string> objects;
};

struct LocalBatch {
  std::string camera_id;
  TimeWindow window;
  std::vector<BatchEntry> entries;
  std::vector<FrameSummary> frames;  // one per ingested frame, in order
  std::vector<std::string> actions;  // distinct, first-seen order
  std::vector<std::string> objects;

  const FrameSummary* frame_at(TimestampMs record_time) const;
};

// One entry per tracklet with a history sighting inside `window`.
LocalBatch emit_local_batch(std::span<const Tracklet> tracklets, const TimeWindow& window, const std::string& camera_id,
                            std::vector<FrameSummary> frames);

// Per-camera edge lane. Frames must arrive in order. Windows are aligned to
// multiples of window_ms; every window from the first one opened onwards is
// emitted exactly once, including windows in which the camera saw nothing.
class EdgeLane {
 public:
  EdgeLane(std::string camera_id, EdgeConfig config);

  // Closes every window that ends at or before the frame's time, then
  // ingests the frame.
  std::vector<LocalBatch> push(const FrameObservation& obs);
  // Opens the window containing `t` when no window is open yet, then closes
  // every window ending at or before `t`. Used as a watermark: the caller
  // promises no later frame is older than `t`.
  std::vector<LocalBatch> advance(TimestampMs t);
  // Closes the open window, if any.
  std::optional<LocalBatch> flush();

  const std::vector<Tracklet>& active() const noexcept { return active_; }
  LocalId issued_ids() const noexcept { return next_local_id_ - 1; }
  const std::string& camera_id() const noexcept { return camera_id_; }

 private:
  LocalBatch close_window();

  std::string camera_id_;
  EdgeConfig config_;
  std::vector<Tracklet> active_;
  std::vector<Tracklet> retired_;  // retired inside the open window
  LocalId next_local_id_ = 1;
  std::optional<TimeWindow> window_;
  std::vector<FrameSummary> frames_;
};

}  // namespace svs
