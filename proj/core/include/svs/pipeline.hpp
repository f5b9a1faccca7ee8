#pragma once

// End-to-end run over a trace: per-camera edge lanes, one global consumer
// (re-ID, persistence, analytics), the gateway and its KV store.
//
//   reader ──► lane[cam] ──► consumer ──► gateway ──► KvStore / notifications
//
// The reader sends a watermark to every lane whenever trace time enters a
// new window, so every lane emits the same window sequence and the consumer
// merges them in lockstep, in camera-id order. Replays are deterministic.

#include <chrono>
#include <istream>
#include <string>
#include <vector>

#include "svs/analytics.hpp"
#include "svs/api/events.hpp"
#include "svs/edge.hpp"
#include "svs/gateway/gateway.hpp"
#include "svs/gateway/kv_store.hpp"
#include "svs/global_node.hpp"

namespace svs {

class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  EdgeConfig edge;
  ReIdConfig reid;
  AnalyticsConfig analytics;
  gateway::RuleSet rules = gateway::default_rules();
  std::size_t lane_queue = 256;     // frames per lane
  std::size_t batch_queue = 8;      // batches per lane
  std::size_t message_queue = 4096;
  // Route messages over a loopback socket instead of an in-process channel.
  bool socket_transport = false;
  std::string transport_token = "svs-local";
  bool keep_messages = false;

  // Throws ConfigError when the stages disagree on dimensions or windows.
  void validate() const;
};

struct StageTimes {
  double ingest_s = 0.0;
  double edge_s = 0.0;  // summed over lanes
  double global_s = 0.0;
  double analytics_s = 0.0;
  double gateway_s = 0.0;
};

struct RunReport {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t windows = 0;
  std::size_t records = 0;
  std::size_t anomalies = 0;
  std::size_t notifications = 0;
  std::size_t messages = 0;
  std::size_t gateway_errors = 0;
  std::size_t epochs_rotated = 0;
  double wall_s = 0.0;
  double throughput_fps = 0.0;
  double detections_per_s = 0.0;  // trace detections per wall-clock second
  double latency_mean_s = 0.0;    // frame arrival to record persist
  double latency_max_s = 0.0;
  // Mean per gateway message; routing excludes the store writes it caused.
  double gateway_ms = 0.0;
  double store_ms = 0.0;
  StageTimes stages;
};

Json to_json(const RunReport& r);

struct RunOutput {
  RunReport report;
  std::vector<double> frame_scores;  // trace order
  std::vector<AnomalyEvent> anomalies;
  std::vector<PushNotification> notifications;
  std::vector<gateway::WireMessage> messages;  // when keep_messages
};

class Pipeline {
 public:
  // `events`, when given, receives every notification the gateway emits.
  Pipeline(std::vector<CameraConfig> cameras, PipelineConfig config, RecordStore& records, gateway::KvStore& kv,
           api::EventBroadcaster* events = nullptr);

  // Throws PipelineError naming the failing stage.
  RunOutput run(std::istream& trace);

 private:
  std::vector<CameraConfig> cameras_;
  PipelineConfig config_;
  RecordStore& records_;
  gateway::KvStore& kv_;
  api::EventBroadcaster* events_;
};

}  // namespace svs
