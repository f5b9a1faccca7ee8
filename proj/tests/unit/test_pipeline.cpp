#include <doctest.h>

#include <sstream>

#include "svs/api/service.hpp"
#include "svs/bench.hpp"
#include "svs/pipeline.hpp"
#include "svs/scenario.hpp"

using namespace svs;

namespace {

constexpr std::size_t kDim = 32;

ScenarioConfig scenario() {
  ScenarioConfig cfg;
  cfg.seed = 3;
  cfg.duration_s = 10.0;
  cfg.target_density = 20.0;
  cfg.feature_dim = kDim;
  cfg.cameras = {default_camera("cam-1", "loc-1"), default_camera("cam-2", "loc-1")};
  cfg.anomaly_injections.push_back({5.0, AnomalyKind::Behavioral, "violence", 90.0, 1.0, "cam-2"});
  return cfg;
}

PipelineConfig config(bool socket = false) {
  PipelineConfig p;
  p.edge.feature_dim = kDim;
  p.reid.feature_dim = kDim;
  p.analytics.min_history = 3;
  p.socket_transport = socket;
  p.keep_messages = true;
  return p;
}

struct Run {
  RecordStore records;
  gateway::KvStore kv;
  RunOutput out;

  Run(const std::string& trace, const PipelineConfig& cfg) {
    Pipeline p(scenario().cameras, cfg, records, kv);
    std::istringstream in(trace);
    out = p.run(in);
  }
};

std::string trace_text(ScenarioStats* stats = nullptr) {
  std::ostringstream os;
  const auto s = generate_scenario(scenario(), os);
  if (stats) *stats = s;
  return os.str();
}

}  // namespace

TEST_CASE("a generated trace runs end to end") {
  ScenarioStats stats;
  const auto trace = trace_text(&stats);
  Run run(trace, config());
  const auto& r = run.out.report;
  CHECK(r.frames == stats.frames);
  CHECK(r.detections == stats.detections);
  CHECK(r.windows == 10);
  CHECK(r.records == run.records.size());
  CHECK(r.records > 0);
  CHECK(r.messages == run.out.messages.size());
  CHECK(r.gateway_errors == 0);
  CHECK(r.throughput_fps > 0);
  CHECK(r.latency_mean_s > 0);
  CHECK(r.latency_max_s >= r.latency_mean_s);
  CHECK(run.out.frame_scores.size() == r.frames);

  REQUIRE(r.anomalies >= 1);
  bool behavioral = false;
  for (const auto& e : run.out.anomalies) {
    if (e.kind != AnomalyKind::Behavioral) continue;
    behavioral = true;
    CHECK(e.camera_id == "cam-2");
    CHECK(e.category == "violence");
    CHECK(e.value == 90.0);
  }
  CHECK(behavioral);
  CHECK(r.notifications == run.out.notifications.size());
  CHECK(r.notifications >= 1);

  const auto doc = to_json(r);
  for (const char* key : {"frames", "throughput_fps", "latency_s", "wall_s"}) CHECK(doc.contains(key));

  api::ApiService api(scenario().cameras, run.kv);
  CHECK(api.current_status("cam-1")["available"] == true);
  CHECK(api.search("cam-1", 0, std::numeric_limits<TimestampMs>::max())["result"]["samples"].get<int>() >= 9);
}

TEST_CASE("replays are deterministic across transports") {
  const auto trace = trace_text();
  Run a(trace, config()), b(trace, config()), c(trace, config(true));
  CHECK(a.records.bytes() == b.records.bytes());
  CHECK(a.records.bytes() == c.records.bytes());
  CHECK(a.kv.dump() == b.kv.dump());
  CHECK(a.kv.dump() == c.kv.dump());
  REQUIRE(a.out.messages.size() == c.out.messages.size());
  for (std::size_t i = 0; i < a.out.messages.size(); ++i) {
    CHECK(a.out.messages[i].topic == c.out.messages[i].topic);
    CHECK(a.out.messages[i].body == c.out.messages[i].body);
  }
  CHECK(a.out.notifications == c.out.notifications);
}

TEST_CASE("failures name their stage") {
  auto trace = trace_text();
  trace += R"({"camera_id": "cam-1", "frame_index": 99999, "record_time": 1800000000000, "image": "AAAA"})" "\n";
  RecordStore records;
  gateway::KvStore kv;
  Pipeline p(scenario().cameras, config(), records, kv);
  std::istringstream in(trace);
  try {
    p.run(in);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }

  auto bad = config();
  bad.reid.feature_dim = 16;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bench accounting adds up") {
  BenchOptions opts;
  opts.densities = {20.0, 70.0};
  opts.duration_s = 10.0;
  opts.api_requests = 10;
  opts.pipeline.edge.feature_dim = kDim;
  opts.pipeline.reid.feature_dim = kDim;
  const auto report = run_bench(opts);
  REQUIRE(report.densities.size() == 2);
  for (const auto& d : report.densities) {
    CHECK(d.trace_density == doctest::Approx(d.density).epsilon(0.05));
    CHECK(d.end_to_end_s == doctest::Approx(d.latency_s + d.cloud.seconds()).epsilon(0.01));
    CHECK(d.throughput_fps > 0);
    CHECK(d.cloud.api_ms > 0);
  }
  CHECK(report.end_to_end_s == report.densities.back().end_to_end_s);
  const auto text = format_bench_report(report);
  CHECK(text.find("52.94") != std::string::npos);
  CHECK(to_json(report)["densities"].size() == 2);
}
