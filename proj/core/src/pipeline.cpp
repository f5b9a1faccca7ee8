#include "svs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "svs/bounded_queue.hpp"
#include "svs/gateway/transport.hpp"
#include "svs/trace.hpp"

namespace svs {
namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

struct LaneInput {
  std::optional<FrameObservation> frame;  // empty: watermark
  TimestampMs watermark = 0;
  Clock::time_point arrival;
};

struct LaneOutput {
  LocalBatch batch;
  std::vector<Clock::time_point> arrivals;  // one per batch frame
};

class Failure {
 public:
  // Keeps the first failure only.
  void set(const std::string& stage, const std::string& what) {
    std::lock_guard lock(mutex_);
    if (!stage_.empty()) return;
    stage_ = stage;
    what_ = what;
    failed_ = true;
  }
  bool failed() const noexcept { return failed_.load(); }
  [[noreturn]] void rethrow() const {
    std::lock_guard lock(mutex_);
    throw PipelineError(stage_, what_);
  }

 private:
  mutable std::mutex mutex_;
  std::atomic<bool> failed_{false};
  std::string stage_;
  std::string what_;
};

std::string statistical_message(const AnalyticsUpdate& u) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << "occupancy " << u.sample.count << " above mean " << u.baseline.mean
     << " + 2 x std " << u.baseline.std;
  return os.str();
}

}  // namespace

void PipelineConfig::validate() const {
  edge.validate();
  reid.validate();
  analytics.validate();
  if (edge.feature_dim != reid.feature_dim) throw ConfigError("edge and re-ID feature dimensions differ");
  if (edge.window_ms != analytics.bucket_ms) throw ConfigError("edge window and analytics bucket lengths differ");
  if (lane_queue == 0 || batch_queue == 0 || message_queue == 0) throw ConfigError("queue capacities must be positive");
}

Json to_json(const RunReport& r) {
  return Json{{"frames", r.frames},
              {"detections", r.detections},
              {"windows", r.windows},
              {"records", r.records},
              {"anomalies", r.anomalies},
              {"notifications", r.notifications},
              {"messages", r.messages},
              {"gateway_errors", r.gateway_errors},
              {"epochs_rotated", r.epochs_rotated},
              {"wall_s", r.wall_s},
              {"throughput_fps", r.throughput_fps},
              {"detections_per_s", r.detections_per_s},
              {"latency_s", r.latency_mean_s},
              {"latency_max_s", r.latency_max_s},
              {"gateway_ms", r.gateway_ms},
              {"store_ms", r.store_ms},
              {"stages",
               {{"ingest_s", r.stages.ingest_s},
                {"edge_s", r.stages.edge_s},
                {"global_s", r.stages.global_s},
                {"analytics_s", r.stages.analytics_s},
                {"gateway_s", r.stages.gateway_s}}}};
}

Pipeline::Pipeline(std::vector<CameraConfig> cameras, PipelineConfig config, RecordStore& records,
                   gateway::KvStore& kv, api::EventBroadcaster* events)
    : cameras_(std::move(cameras)), config_(std::move(config)), records_(records), kv_(kv), events_(events) {
  config_.validate();
  if (cameras_.empty()) throw ConfigError("pipeline needs at least one camera");
  for (const auto& c : cameras_) c.validate();
  std::sort(cameras_.begin(), cameras_.end(),
            [](const CameraConfig& a, const CameraConfig& b) { return a.camera_id < b.camera_id; });
  for (std::size_t i = 1; i < cameras_.size(); ++i) {
    if (cameras_[i].camera_id == cameras_[i - 1].camera_id) {
      throw ConfigError("duplicate camera '" + cameras_[i].camera_id + "'");
    }
  }
}

RunOutput Pipeline::run(std::istream& trace) {
  const std::size_t n = cameras_.size();
  std::map<std::string, std::size_t, std::less<>> index;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    index.emplace(cameras_[i].camera_id, i);
    ids.push_back(cameras_[i].camera_id);
  }

  std::vector<std::unique_ptr<BoundedQueue<LaneInput>>> lane_in;
  std::vector<std::unique_ptr<BoundedQueue<LaneOutput>>> lane_out;
  for (std::size_t i = 0; i < n; ++i) {
    lane_in.push_back(std::make_unique<BoundedQueue<LaneInput>>(config_.lane_queue));
    lane_out.push_back(std::make_unique<BoundedQueue<LaneOutput>>(config_.batch_queue));
  }
  gateway::MessageChannel channel(config_.message_queue);

  RunOutput out;
  std::mutex out_mutex;
  Failure failure;
  auto abort_all = [&] {
    for (auto& q : lane_in) q->close();
    for (auto& q : lane_out) q->close();
    channel.close();
  };
  auto fail = [&](const std::string& stage, const std::string& what) {
    failure.set(stage, what);
    abort_all();
  };

  gateway::Gateway gw(config_.rules, kv_, [&](const PushNotification& note) {
    {
      std::lock_guard lock(out_mutex);
      out.notifications.push_back(note);
    }
    if (events_ != nullptr) events_->publish(note);
  });

  const auto started = Clock::now();
  double gateway_busy = 0.0;
  auto handle = [&](const gateway::WireMessage& m) {
    const auto t0 = Clock::now();
    gw.process(m);
    gateway_busy += seconds(Clock::now() - t0);
  };

  // Gateway side.
  std::thread gateway_thread;
  std::unique_ptr<gateway::GatewayListener> listener;
  std::unique_ptr<gateway::GatewayClient> client;
  if (config_.socket_transport) {
    listener = std::make_unique<gateway::GatewayListener>(config_.transport_token, [&](gateway::WireMessage m) {
      try {
        handle(m);
      } catch (const std::exception& e) {
        fail("gateway", e.what());
      }
    });
    const auto port = listener->start(0);
    client = std::make_unique<gateway::GatewayClient>("127.0.0.1", port, config_.transport_token);
  } else {
    gateway_thread = std::thread([&] {
      try {
        while (auto m = channel.pop()) handle(*m);
      } catch (const std::exception& e) {
        fail("gateway", e.what());
      }
    });
  }
  auto publish = [&](gateway::WireMessage m) {
    if (config_.keep_messages) out.messages.push_back(m);
    if (client) {
      client->send(m);
    } else if (!channel.push(std::move(m))) {
      throw Error("gateway channel closed");
    }
  };

  // Edge lanes.
  std::vector<double> lane_busy(n, 0.0);
  std::vector<std::thread> lanes;
  for (std::size_t i = 0; i < n; ++i) {
    lanes.emplace_back([&, i] {
      try {
        EdgeLane lane(ids[i], config_.edge);
        std::deque<Clock::time_point> arrivals;
        while (auto item = lane_in[i]->pop()) {
          const auto t0 = Clock::now();
          std::vector<LocalBatch> emitted;
          if (item->frame) {
            emitted = lane.push(*item->frame);
            arrivals.push_back(item->arrival);
          } else {
            emitted = lane.advance(item->watermark);
          }
          lane_busy[i] += seconds(Clock::now() - t0);
          for (auto& b : emitted) {
            LaneOutput o;
            const auto k = std::min(b.frames.size(), arrivals.size());
            o.arrivals.assign(arrivals.begin(), arrivals.begin() + static_cast<std::ptrdiff_t>(k));
            arrivals.erase(arrivals.begin(), arrivals.begin() + static_cast<std::ptrdiff_t>(k));
            o.batch = std::move(b);
            if (!lane_out[i]->push(std::move(o))) return;
          }
        }
        lane_out[i]->close();
      } catch (const std::exception& e) {
        fail("edge[" + ids[i] + "]", e.what());
      }
    });
  }

  // Global consumer: re-ID, persistence, analytics, publication.
  double global_busy = 0.0;
  double analytics_busy = 0.0;
  double latency_sum = 0.0;
  double latency_max = 0.0;
  std::size_t latency_n = 0;
  std::thread consumer([&] {
    const char* stage = "global";
    try {
      std::optional<GlobalNode> node;
      std::vector<CameraAnalytics> analytics;
      for (const auto& c : cameras_) analytics.emplace_back(c, config_.analytics);
      while (true) {
        std::vector<LaneOutput> step;
        for (std::size_t i = 0; i < n; ++i) {
          auto o = lane_out[i]->pop();
          if (!o) break;
          step.push_back(std::move(*o));
        }
        if (step.size() < n) {
          if (!step.empty() && !failure.failed()) throw Error("lanes emitted different window sequences");
          break;
        }
        for (std::size_t i = 1; i < n; ++i) {
          if (!(step[i].batch.window == step[0].batch.window)) throw Error("lanes are out of window lockstep");
        }
        ++out.report.windows;
        for (std::size_t i = 0; i < n; ++i) {
          const LocalBatch& batch = step[i].batch;
          stage = "global";
          const auto t0 = Clock::now();
          if (!node) node.emplace(config_.reid, ids, records_, batch.window.start);
          BatchResult res = node->process_batch(batch);
          const auto persisted = Clock::now();
          global_busy += seconds(persisted - t0);
          for (const auto& a : step[i].arrivals) {
            const double l = seconds(persisted - a);
            latency_sum += l;
            latency_max = std::max(latency_max, l);
            ++latency_n;
          }
          out.report.records += res.records.size();
          out.report.epochs_rotated += res.rotated ? 1 : 0;

          stage = "analytics";
          const auto t1 = Clock::now();
          AnalyticsUpdate u = analytics[i].observe(batch.window.start, res.records);
          analytics_busy += seconds(Clock::now() - t1);

          stage = "publish";
          const std::string& cam = ids[i];
          const TimestampMs ts = batch.window.start;
          publish({"counts/" + cam, Json{{"camera_id", cam}, {"ts_ms", ts}, {"count", u.sample.count}}});
          publish({"analytics/" + cam, u.publication()});
          if (u.heatmap_due) publish({"heatmap/" + cam, export_heatmap(analytics[i].heatmap(), ts)});
          if (u.statistical_anomaly) {
            AnomalyEvent ev;
            ev.kind = AnomalyKind::Statistical;
            ev.camera_id = cam;
            ev.record_time = ts;
            ev.value = static_cast<double>(u.sample.count);
            ev.message = statistical_message(u);
            res.events.push_back(std::move(ev));
          }
          for (const auto& ev : res.events) {
            publish({"anomaly/" + cam, to_json(ev)});
            out.anomalies.push_back(ev);
          }
        }
      }
      if (client) client->close();
      channel.close();
    } catch (const std::exception& e) {
      fail(stage, e.what());
    }
  });

  // Ingest on the calling thread.
  double ingest_busy = 0.0;
  try {
    TraceReader reader(trace, TraceOptions{config_.edge.feature_dim});
    std::optional<TimestampMs> window;
    auto broadcast = [&](TimestampMs w) {
      for (auto& q : lane_in) {
        if (!q->push(LaneInput{std::nullopt, w, {}})) return false;
      }
      return true;
    };
    bool open = true;
    while (open) {
      const auto arrival = Clock::now();
      auto obs = reader.next();
      ingest_busy += seconds(Clock::now() - arrival);
      if (!obs) break;
      const auto it = index.find(obs->camera_id);
      if (it == index.end()) {
        throw ValidationError("line " + std::to_string(reader.line()) + ": unknown camera '" + obs->camera_id + "'");
      }
      const TimestampMs w = window_floor(obs->record_time, config_.edge.window_ms);
      if (window && w < *window) {
        throw OrderingError("line " + std::to_string(reader.line()) + ": frame is older than a closed window");
      }
      if (!window || w > *window) {
        window = w;
        open = broadcast(w);
      }
      out.frame_scores.push_back(obs->frame_anomaly_score);
      ++out.report.frames;
      out.report.detections += obs->detections.size();
      open = open && lane_in[it->second]->push(LaneInput{std::move(obs), 0, arrival});
    }
    if (window && open) broadcast(*window + config_.edge.window_ms);
  } catch (const std::exception& e) {
    fail("ingest", e.what());
  }
  for (auto& q : lane_in) q->close();

  for (auto& t : lanes) t.join();
  consumer.join();
  if (gateway_thread.joinable()) gateway_thread.join();
  if (listener) listener->stop();
  if (failure.failed()) failure.rethrow();

  auto& r = out.report;
  r.wall_s = seconds(Clock::now() - started);
  r.throughput_fps = r.wall_s > 0.0 ? static_cast<double>(r.frames) / r.wall_s : 0.0;
  r.detections_per_s = r.wall_s > 0.0 ? static_cast<double>(r.detections) / r.wall_s : 0.0;
  r.latency_mean_s = latency_n ? latency_sum / static_cast<double>(latency_n) : 0.0;
  r.latency_max_s = latency_max;
  const auto gs = gw.stats();
  r.messages = gs.messages;
  r.gateway_errors = gs.errors;
  if (gs.messages > 0) {
    r.gateway_ms = (gs.total_gateway_ms - gs.total_store_ms) / static_cast<double>(gs.messages);
    r.store_ms = gs.total_store_ms / static_cast<double>(gs.messages);
  }
  r.anomalies = out.anomalies.size();
  r.notifications = out.notifications.size();
  r.stages.ingest_s = ingest_busy;
  for (double b : lane_busy) r.stages.edge_s += b;
  r.stages.global_s = global_busy;
  r.stages.analytics_s = analytics_busy;
  r.stages.gateway_s = gateway_busy;
  return out;
}

}  // namespace svs
