// svs: generate traces, run the pipeline, benchmark, serve the API, score AUC.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "svs/api/http_server.hpp"
#include "svs/bench.hpp"
#include "svs/gateway/transport.hpp"
#include "svs/metrics.hpp"
#include "svs/pipeline.hpp"
#include "svs/scenario.hpp"

namespace fs = std::filesystem;
using namespace svs;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// One number per line or comma separated; a non-numeric first line is a header.
std::vector<double> read_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      if (cell.empty()) continue;
      std::size_t used = 0;
      try {
        out.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size()) {
        if (lineno == 1) break;
        throw ParseError("'" + cell + "' in " + path + " is not a number", lineno);
      }
    }
  }
  return out;
}

struct PipelineFlags {
  TimestampMs window_ms = 1000;
  double threshold = 50.0;
  TimestampMs epoch_ms = kDefaultEpochLengthMs;
  std::uint64_t reid_seed = 0x5eed;
  double similarity = 0.7;
  std::size_t min_history = 60;
  std::size_t feature_dim = kDefaultFeatureDim;
  bool socket = false;

  void add(CLI::App* app) {
    app->add_option("--window-ms", window_ms, "Edge window and analytics bucket length")->capture_default_str();
    app->add_option("--threshold", threshold, "Behavioral anomaly threshold in [0, 100]")->capture_default_str();
    app->add_option("--epoch-ms", epoch_ms, "Re-ID epoch length")->capture_default_str();
    app->add_option("--reid-seed", reid_seed, "Seed of the epoch transforms")->capture_default_str();
    app->add_option("--similarity", similarity, "Re-ID cosine match threshold")->capture_default_str();
    app->add_option("--min-history", min_history, "Buckets before statistical anomalies are reported")
        ->capture_default_str();
    app->add_option("--feature-dim", feature_dim, "Feature vector length")->capture_default_str();
    app->add_flag("--socket", socket, "Send messages to the gateway over a loopback socket");
  }

  PipelineConfig build(const std::string& rules_path) const {
    PipelineConfig cfg;
    cfg.edge.window_ms = window_ms;
    cfg.edge.feature_dim = feature_dim;
    cfg.reid.feature_dim = feature_dim;
    cfg.reid.behavior_threshold = threshold;
    cfg.reid.epoch_length_ms = epoch_ms;
    cfg.reid.seed = reid_seed;
    cfg.reid.similarity_threshold = similarity;
    cfg.analytics.bucket_ms = window_ms;
    cfg.analytics.min_history = min_history;
    cfg.socket_transport = socket;
    if (!rules_path.empty()) cfg.rules = gateway::load_rules(rules_path);
    return cfg;
  }
};

Json search_summary(const api::ApiService& service, const gateway::KvStore& kv, TimestampMs window_ms) {
  Json out = Json::array();
  for (const auto& cam : service.cameras()) {
    const auto rows = kv.range("counts", cam.camera_id, std::numeric_limits<TimestampMs>::min(),
                               std::numeric_limits<TimestampMs>::max());
    if (rows.empty()) {
      out.push_back(service.search(cam.camera_id, 0, 0));
      continue;
    }
    const TimestampMs t0 = rows.front().key.ts_ms;
    const TimestampMs t1 = rows.back().key.ts_ms;
    out.push_back(service.search(cam.camera_id, t0, t1));
    const TimestampMs step = 10 * window_ms;
    for (TimestampMs a = t0; a <= t1; a += step) out.push_back(service.search(cam.camera_id, a, a + step - 1));
  }
  return out;
}

int cmd_generate(const std::string& config, const std::string& out, const std::string& labels) {
  const auto cfg = load_scenario(config);
  std::ofstream trace(out, std::ios::binary);
  if (!trace) throw Error("cannot write " + out);
  std::ofstream label_file;
  if (!labels.empty()) {
    label_file.open(labels, std::ios::binary);
    if (!label_file) throw Error("cannot write " + labels);
  }
  const auto stats = generate_scenario(cfg, trace, labels.empty() ? nullptr : &label_file);
  std::cerr << "wrote " << stats.frames << " frames, " << stats.detections << " detections ("
            << stats.detections_per_second << " per second per camera), " << stats.anomalous_frames
            << " anomalous frames\n";
  return 0;
}

int cmd_run(const std::string& trace_path, const std::string& cameras_path, const std::string& rules_path,
            const std::string& report_path, const std::string& out_dir, const std::string& labels_path,
            const PipelineFlags& flags) {
  const auto cameras = load_camera_configs(cameras_path);
  const auto cfg = flags.build(rules_path);
  fs::create_directories(out_dir);
  RecordStore records((fs::path(out_dir) / "records.jsonl").string());
  gateway::KvStore kv;
  Pipeline pipeline(cameras, cfg, records, kv);
  std::ifstream trace(trace_path, std::ios::binary);
  if (!trace) throw Error("cannot open " + trace_path);
  auto run = pipeline.run(trace);

  api::ApiService service(cameras, kv);
  write_file(fs::path(out_dir) / "store.json", kv.dump().dump(1) + "\n");
  write_file(fs::path(out_dir) / "search.json", search_summary(service, kv, cfg.edge.window_ms).dump(1) + "\n");
  std::ostringstream scores;
  for (double s : run.frame_scores) scores << s << '\n';
  write_file(fs::path(out_dir) / "scores.csv", scores.str());

  Json report = to_json(run.report);
  if (!labels_path.empty()) {
    std::vector<int> labels;
    for (double v : read_numbers(labels_path)) labels.push_back(static_cast<int>(v));
    const auto ev = evaluate_anomaly_run(run.frame_scores, labels, cfg.reid.behavior_threshold);
    report["evaluation"] = {{"auc", ev.auc ? Json(*ev.auc) : Json(nullptr)},
                            {"flags", ev.flags},
                            {"false_pos", ev.false_pos},
                            {"false_neg", ev.false_neg}};
  }
  const std::string report_text = report.dump(2) + "\n";
  write_file(report_path.empty() ? fs::path(out_dir) / "report.json" : fs::path(report_path), report_text);
  std::cout << report_text;
  return 0;
}

int cmd_bench(const std::string& densities, double duration, double fps, std::uint64_t seed,
              const std::string& report_path, const std::string& work_dir, const PipelineFlags& flags) {
  BenchOptions opts;
  opts.densities.clear();
  std::stringstream ss(densities);
  std::string d;
  while (std::getline(ss, d, ',')) opts.densities.push_back(std::stod(d));
  opts.duration_s = duration;
  opts.fps = fps;
  opts.seed = seed;
  opts.work_dir = work_dir;
  opts.pipeline = flags.build("");
  const auto report = run_bench(opts, &std::cerr);
  std::cout << format_bench_report(report);
  if (!report_path.empty()) write_file(report_path, to_json(report).dump(2) + "\n");
  return report.throughput_non_increasing() ? 0 : 3;
}

int cmd_serve(const std::string& cameras_path, const std::string& rules_path, const std::string& trace_path,
              int port, int gateway_port, const std::string& token, const std::string& users_path,
              const PipelineFlags& flags) {
  const auto cameras = load_camera_configs(cameras_path);
  const auto cfg = flags.build(rules_path);
  gateway::KvStore kv;
  api::EventBroadcaster events;
  api::UserRegistry users;
  if (users_path.empty()) {
    users.add_user({"demo", "Demo", "User", "demo@localhost"}, "demo");
  } else {
    std::ifstream in(users_path);
    const Json doc = Json::parse(in);
    for (const auto& u : doc) {
      users.add_user({u.at("user_id"), u.value("first_name", ""), u.value("last_name", ""), u.at("email")},
                     u.at("password"));
    }
  }
  api::ApiService service(cameras, kv);
  api::ServerOptions opts;
  opts.port = port;
  api::ApiServer server(service, users, events, opts);
  const int bound = server.start();

  gateway::Gateway gw(cfg.rules, kv, [&](const PushNotification& n) { events.publish(n); });
  std::mutex gw_mutex;
  gateway::GatewayListener listener(token, [&](gateway::WireMessage m) {
    std::lock_guard lock(gw_mutex);
    gw.process(m);
  });
  const auto gport = listener.start(static_cast<std::uint16_t>(gateway_port));
  std::cerr << "api listening on http://127.0.0.1:" << bound << ", gateway on 127.0.0.1:" << gport << "\n";

  std::thread replay;
  RecordStore records;
  if (!trace_path.empty()) {
    replay = std::thread([&] {
      try {
        Pipeline pipeline(cameras, cfg, records, kv, &events);
        std::ifstream trace(trace_path, std::ios::binary);
        const auto run = pipeline.run(trace);
        std::cerr << "replayed " << run.report.frames << " frames, " << run.report.records << " records\n";
      } catch (const std::exception& e) {
        std::cerr << "replay failed: " << e.what() << "\n";
      }
    });
  }
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (replay.joinable()) replay.join();
  listener.stop();
  events.shutdown();
  server.stop();
  return 0;
}

int cmd_eval_auc(const std::string& scores_path, const std::string& labels_path, double threshold) {
  const auto scores = read_numbers(scores_path);
  std::vector<int> labels;
  for (double v : read_numbers(labels_path)) labels.push_back(static_cast<int>(v));
  const auto ev = evaluate_anomaly_run(scores, labels, threshold);
  Json out{{"auc", ev.auc ? Json(*ev.auc) : Json(nullptr)},
           {"flags", ev.flags},
           {"false_pos", ev.false_pos},
           {"false_neg", ev.false_neg},
           {"positives", ev.positives},
           {"negatives", ev.negatives}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving video analytics pipeline"};
  app.require_subcommand(1);

  std::string config, out, labels;
  auto* gen = app.add_subcommand("generate", "Write a synthetic detection trace");
  gen->add_option("--config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Trace output path")->required();
  gen->add_option("--labels", labels, "Per-frame 0/1 ground truth output path");

  std::string trace, cameras, rules, report, out_dir = "run";
  PipelineFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the pipeline over a trace");
  run->add_option("--trace", trace, "Trace (JSON lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--cameras", cameras, "Camera configs (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--rules", rules, "Gateway rules (JSON); defaults to the built-in set")->check(CLI::ExistingFile);
  run->add_option("--report", report, "Report path; defaults to <out-dir>/report.json");
  run->add_option("--out-dir", out_dir, "Artifact directory")->capture_default_str();
  run->add_option("--labels", labels, "Ground truth for frame-level evaluation")->check(CLI::ExistingFile);
  run_flags.add(run);

  std::string densities = "70,216,744", work_dir;
  double duration = 60.0, fps = 30.0;
  std::uint64_t seed = 1;
  PipelineFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Throughput and latency across crowd densities");
  bench->add_option("--densities", densities, "Detections per second, comma separated")->capture_default_str();
  bench->add_option("--duration", duration, "Scenario length in seconds")->capture_default_str();
  bench->add_option("--fps", fps, "Frames per second")->capture_default_str();
  bench->add_option("--seed", seed, "Scenario seed")->capture_default_str();
  bench->add_option("--report", report, "Write the report as JSON");
  bench->add_option("--work-dir", work_dir, "Where traces are generated");
  bench_flags.add(bench);

  int port = 8080, gateway_port = 0;
  std::string token = "svs-local", users;
  PipelineFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "Serve the API and accept gateway connections");
  serve->add_option("--cameras", cameras, "Camera configs (JSON)")->required()->check(CLI::ExistingFile);
  serve->add_option("--rules", rules, "Gateway rules (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--trace", trace, "Replay this trace into the running services")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "API port")->capture_default_str();
  serve->add_option("--gateway-port", gateway_port, "Gateway port, 0 picks one")->capture_default_str();
  serve->add_option("--token", token, "Shared gateway token")->capture_default_str();
  serve->add_option("--users", users, "Users (JSON array of {user_id, email, password, ...})")
      ->check(CLI::ExistingFile);
  serve_flags.add(serve);

  std::string scores;
  double threshold = 50.0;
  auto* eval = app.add_subcommand("eval-auc", "AUC-ROC and confusion counts of frame scores");
  eval->add_option("--scores", scores, "Scores (CSV)")->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", labels, "0/1 labels (CSV)")->required()->check(CLI::ExistingFile);
  eval->add_option("--threshold", threshold, "Flag threshold")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(config, out, labels);
    if (*run) return cmd_run(trace, cameras, rules, report, out_dir, labels, run_flags);
    if (*bench) return cmd_bench(densities, duration, fps, seed, report, work_dir, bench_flags);
    if (*serve) return cmd_serve(cameras, rules, trace, port, gateway_port, token, users, serve_flags);
    if (*eval) return cmd_eval_auc(scores, labels, threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
