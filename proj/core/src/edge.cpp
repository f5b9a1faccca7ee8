#include "svs/edge.hpp"

#include <algorithm>
#include <tuple>

#include "svs/error.hpp"

namespace svs {
namespace {

void append_distinct(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  for (const auto& s : src) {
    if (std::find(dst.begin(), dst.end(), s) == dst.end()) dst.push_back(s);
  }
}

}  // namespace

TimestampMs window_floor(TimestampMs t, TimestampMs len) {
  TimestampMs q = t / len;
  if ((t % len != 0) && ((t < 0) != (len < 0))) --q;
  return q * len;
}

void EdgeConfig::validate() const {
  if (!(detection_floor >= 0.0 && detection_floor <= 1.0)) throw ConfigError("detection_floor outside [0, 1]");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("iou_threshold outside (0, 1]");
  if (window_ms <= 0) throw ConfigError("window_ms must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
}

std::vector<Detection> filter_pedestrians(const FrameObservation& obs, double detection_floor) {
  std::vector<Detection> out;
  for (const auto& d : obs.detections) {
    if (d.cls == "person" && d.conf >= detection_floor) out.push_back(d);
  }
  return out;
}

double quality_score(const Detection& d) {
  if (!d.pose) return 0.0;
  return d.conf * d.pose->mean_confidence();
}

void Tracklet::observe(TrackEntry entry) {
  last_bbox = entry.detection.bbox;
  last_seen_frame = entry.frame_index;
  if (observations == 0 || entry.quality >= best.quality) best = entry;
  ++observations;
  if (entry.detection.feature) last_with_feature = entry;
  history.push_back(std::move(entry));
}

const Detection& select_best_representation(const Tracklet& t) {
  if (t.history.empty()) throw ValidationError("cannot select a representation from an empty tracklet");
  const TrackEntry* best = &t.history.front();
  for (const auto& e : t.history) {
    if (e.quality > best->quality || (e.quality == best->quality && e.frame_index >= best->frame_index)) best = &e;
  }
  return best->detection;
}

AssociationResult associate_tracks(std::vector<Tracklet>& active, std::span<const Detection> dets,
                                   std::uint64_t frame_index, TimestampMs record_time, const std::string& camera_id,
                                   LocalId& next_local_id, const EdgeConfig& config) {
  struct Candidate {
    double iou;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < active.size(); ++t) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const double iou = bbox_iou(active[t].last_bbox, dets[d].bbox);
      if (iou >= config.iou_threshold) candidates.push_back({iou, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.iou, a.track, a.det) < std::tie(a.iou, b.track, b.det);
  });

  AssociationResult result;
  result.local_ids.assign(dets.size(), 0);
  std::vector<bool> track_used(active.size(), false);
  for (const auto& c : candidates) {
    if (track_used[c.track] || result.local_ids[c.det] != 0) continue;
    track_used[c.track] = true;
    result.local_ids[c.det] = active[c.track].local_id;
    active[c.track].observe({frame_index, record_time, dets[c.det], quality_score(dets[c.det])});
  }
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (result.local_ids[d] != 0) continue;
    Tracklet t;
    t.local_id = next_local_id++;
    t.camera_id = camera_id;
    t.observe({frame_index, record_time, dets[d], quality_score(dets[d])});
    result.local_ids[d] = t.local_id;
    active.push_back(std::move(t));
  }

  auto stale = std::stable_partition(active.begin(), active.end(), [&](const Tracklet& t) {
    return frame_index - t.last_seen_frame <= config.max_age_frames;
  });
  std::move(stale, active.end(), std::back_inserter(result.retired));
  active.erase(stale, active.end());
  return result;
}

const FrameSummary* LocalBatch::frame_at(TimestampMs record_time) const {
  for (const auto& f : frames) {
    if (f.record_time == record_time) return &f;
  }
  return nullptr;
}

LocalBatch emit_local_batch(std::span<const Tracklet> tracklets, const TimeWindow& window, const std::string& camera_id,
                            std::vector<FrameSummary> frames) {
  LocalBatch batch;
  batch.camera_id = camera_id;
  batch.window = window;
  for (const auto& t : tracklets) {
    const TrackEntry* latest = nullptr;
    for (const auto& e : t.history) {
      if (window.contains(e.record_time)) latest = &e;
    }
    if (latest == nullptr) continue;
    BatchEntry entry;
    entry.local_id = t.local_id;
    entry.best = t.best.detection;
    if (t.best.detection.feature) {
      entry.feature = t.best.detection.feature;
    } else if (t.last_with_feature) {
      entry.feature = t.last_with_feature->detection.feature;
    }
    entry.record_time = latest->record_time;
    entry.bbox_tlwh = latest->detection.bbox;
    batch.entries.push_back(std::move(entry));
  }
  std::sort(batch.entries.begin(), batch.entries.end(),
            [](const BatchEntry& a, const BatchEntry& b) { return a.local_id < b.local_id; });
  for (const auto& f : frames) {
    append_distinct(batch.actions, f.actions);
    append_distinct(batch.objects, f.objects);
  }
  batch.frames = std::move(frames);
  return batch;
}

EdgeLane::EdgeLane(std::string camera_id, EdgeConfig config) : camera_id_(std::move(camera_id)), config_(config) {
  config_.validate();
}

std::vector<LocalBatch> EdgeLane::advance(TimestampMs t) {
  std::vector<LocalBatch> out;
  if (!window_) {
    const TimestampMs start = window_floor(t, config_.window_ms);
    window_ = TimeWindow{start, start + config_.window_ms};
  }
  while (window_->end <= t) {
    const TimeWindow next{window_->end, window_->end + config_.window_ms};
    out.push_back(close_window());
    window_ = next;
  }
  return out;
}

std::vector<LocalBatch> EdgeLane::push(const FrameObservation& obs) {
  if (obs.camera_id != camera_id_) {
    throw ValidationError("frame for camera '" + obs.camera_id + "' pushed into lane '" + camera_id_ + "'");
  }
  if (window_ && obs.record_time < window_->start) throw OrderingError("frame time precedes the open window");
  auto emitted = advance(obs.record_time);

  const auto dets = filter_pedestrians(obs, config_.detection_floor);
  auto assoc = associate_tracks(active_, dets, obs.frame_index, obs.record_time, camera_id_, next_local_id_, config_);
  for (auto& t : assoc.retired) retired_.push_back(std::move(t));
  frames_.push_back({obs.frame_index, obs.record_time, obs.frame_anomaly_score, obs.actions, obs.objects});
  return emitted;
}

std::optional<LocalBatch> EdgeLane::flush() {
  if (!window_) return std::nullopt;
  return close_window();
}

LocalBatch EdgeLane::close_window() {
  const auto n_active = active_.size();
  for (auto& t : retired_) active_.push_back(std::move(t));
  retired_.clear();
  LocalBatch batch = emit_local_batch(active_, *window_, camera_id_, std::move(frames_));
  frames_.clear();
  active_.resize(n_active);
  for (auto& t : active_) t.history.clear();
  window_.reset();
  return batch;
}

}  // namespace svs
