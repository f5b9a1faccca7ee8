#include "svs/bench.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "svs/api/http_server.hpp"

namespace svs {
namespace {

std::string first_line_with(const std::string& path, const std::string& prefix) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) return {};
      auto v = line.substr(colon + 1);
      v.erase(0, v.find_first_not_of(" \t"));
      return v;
    }
  }
  return {};
}

}  // namespace

std::string hardware_description() {
  std::ostringstream os;
  const auto cpu = first_line_with("/proc/cpuinfo", "model name");
  os << (cpu.empty() ? "unknown CPU" : cpu) << ", " << std::thread::hardware_concurrency() << " hardware threads";
  const auto mem = first_line_with("/proc/meminfo", "MemTotal");
  if (!mem.empty()) os << ", " << mem << " RAM";
#if defined(__clang__)
  os << ", clang " << __clang_version__;
#elif defined(__GNUC__)
  os << ", gcc " << __VERSION__;
#endif
  os << ", no GPU";
  return os.str();
}

bool BenchReport::throughput_non_increasing() const {
  for (std::size_t i = 1; i < densities.size(); ++i) {
    if (densities[i].density >= densities[i - 1].density &&
        densities[i].throughput_fps > densities[i - 1].throughput_fps) {
      return false;
    }
  }
  return true;
}

namespace {

Json cloud_json(const CloudTimings& c) {
  return Json{{"gateway_ms", c.gateway_ms}, {"store_ms", c.store_ms}, {"api_ms", c.api_ms}};
}

const ReferencePoint* reference_for(double density) {
  for (const auto& r : kReferencePoints) {
    if (r.density == density) return &r;
  }
  return nullptr;
}

}  // namespace

Json to_json(const BenchReport& r) {
  Json rows = Json::array();
  for (const auto& d : r.densities) {
    Json row{{"density", d.density},
             {"trace_density", d.trace_density},
             {"throughput_fps", d.throughput_fps},
             {"latency_s", d.latency_s},
             {"latency_max_s", d.latency_max_s},
             {"cloud", cloud_json(d.cloud)},
             {"end_to_end_s", d.end_to_end_s},
             {"run", to_json(d.run)}};
    if (const auto* ref = reference_for(d.density)) {
      row["reference"] = {{"throughput_fps", ref->throughput_fps}, {"latency_s", ref->latency_s}};
    }
    rows.push_back(std::move(row));
  }
  return Json{{"duration_s", r.duration_s},
              {"fps", r.fps},
              {"densities", std::move(rows)},
              {"cloud", cloud_json(r.cloud)},
              {"end_to_end_s", r.end_to_end_s},
              {"reference", {{"end_to_end_s", kReferenceEndToEndS}, {"cloud_s", kReferenceCloudS}}},
              {"throughput_non_increasing", r.throughput_non_increasing()},
              {"hardware", r.hardware}};
}

std::string format_bench_report(const BenchReport& r) {
  std::ostringstream os;
  os << std::fixed;
  os << "hardware: " << r.hardware << "\n";
  os << "scenario: " << std::setprecision(0) << r.duration_s << " s at " << r.fps << " fps per density\n\n";
  os << "density  trace/s  fps(meas)  fps(ref)  latency_s(meas)  latency_s(ref)  max_latency_s  end_to_end_s\n";
  for (const auto& d : r.densities) {
    const auto* ref = reference_for(d.density);
    os << std::setw(7) << std::setprecision(0) << d.density << "  " << std::setw(7) << std::setprecision(1)
       << d.trace_density << "  " << std::setw(9) << std::setprecision(2) << d.throughput_fps << "  " << std::setw(8);
    if (ref) {
      os << ref->throughput_fps;
    } else {
      os << "-";
    }
    os << "  " << std::setw(15) << std::setprecision(3) << d.latency_s << "  " << std::setw(14);
    if (ref) {
      os << std::setprecision(2) << ref->latency_s;
    } else {
      os << "-";
    }
    os << "  " << std::setw(13) << std::setprecision(3) << d.latency_max_s << "  " << std::setw(12) << d.end_to_end_s
       << "\n";
  }
  os << "\ncloud path (densest run): gateway " << std::setprecision(4) << r.cloud.gateway_ms << " ms, store "
     << r.cloud.store_ms << " ms, api " << r.cloud.api_ms << " ms  (reference " << std::setprecision(2)
     << kReferenceCloudS << " s)\n";
  os << "end to end (densest run): " << std::setprecision(3) << r.end_to_end_s << " s  (reference "
     << std::setprecision(1) << kReferenceEndToEndS << " s)\n";
  os << "throughput non-increasing in density: " << (r.throughput_non_increasing() ? "yes" : "NO") << "\n";
  os << "reference figures were measured on different hardware and are shown for comparison only\n";
  return os.str();
}

double measure_api_ms(const api::ApiService& service, std::size_t requests) {
  if (requests == 0) return 0.0;
  api::UserRegistry users;
  users.add_user({"bench", "Bench", "User", "bench@localhost"}, "bench");
  const auto token = users.login("bench@localhost", "bench").value();
  api::EventBroadcaster events;
  api::ServerOptions opts;
  opts.threads = 4;
  api::ApiServer server(service, users, events, opts);
  const int port = server.start();

  std::vector<std::string> paths;
  for (const auto& c : service.cameras()) {
    paths.push_back("/cameras/" + c.camera_id + "/status");
    paths.push_back("/cameras/" + c.camera_id + "/anomalies?window=24h");
    paths.push_back("/cameras/" + c.camera_id + "/search?from=0&to=" +
                    std::to_string(std::numeric_limits<TimestampMs>::max()));
    paths.push_back("/cameras/" + c.camera_id + "/bev");
  }
  httplib::Client client("127.0.0.1", port);
  client.set_keep_alive(true);
  client.set_tcp_nodelay(true);
  const httplib::Headers headers{{"Authorization", "Bearer " + token}};
  double total = 0.0;
  for (std::size_t i = 0; i < requests; ++i) {
    const auto& path = paths[i % paths.size()];
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Get(path, headers);
    total += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!res || res->status != 200) {
      server.stop();
      throw Error("API request " + path + " failed during measurement");
    }
  }
  server.stop();
  return total / static_cast<double>(requests);
}

BenchReport run_bench(const BenchOptions& options, std::ostream* log) {
  if (options.densities.empty()) throw ConfigError("bench needs at least one density");
  namespace fs = std::filesystem;
  const fs::path dir = options.work_dir.empty() ? fs::temp_directory_path() : fs::path(options.work_dir);
  fs::create_directories(dir);

  BenchReport report;
  report.hardware = hardware_description();
  report.duration_s = options.duration_s;
  report.fps = options.fps;
  for (double density : options.densities) {
    ScenarioConfig sc;
    sc.seed = options.seed;
    sc.duration_s = options.duration_s;
    sc.fps = options.fps;
    sc.target_density = density;
    sc.feature_dim = options.pipeline.edge.feature_dim;
    sc.cameras.push_back(default_camera());
    std::ostringstream name;
    name << "svs-bench-" << options.seed << "-" << density << ".jsonl";
    const fs::path trace_path = dir / name.str();
    ScenarioStats stats;
    {
      std::ofstream trace(trace_path);
      if (!trace) throw Error("cannot write " + trace_path.string());
      stats = generate_scenario(sc, trace);
    }

    RecordStore records;
    gateway::KvStore kv;
    Pipeline pipeline(sc.cameras, options.pipeline, records, kv);
    RunOutput run;
    {
      std::ifstream trace(trace_path);
      run = pipeline.run(trace);
    }
    if (!options.keep_traces) fs::remove(trace_path);

    api::ApiService service(sc.cameras, kv);
    DensityResult d;
    d.density = density;
    d.trace_density = stats.detections_per_second;
    d.throughput_fps = run.report.throughput_fps;
    d.latency_s = run.report.latency_mean_s;
    d.latency_max_s = run.report.latency_max_s;
    d.cloud = CloudTimings{run.report.gateway_ms, run.report.store_ms, measure_api_ms(service, options.api_requests)};
    d.end_to_end_s = d.latency_s + d.cloud.seconds();
    d.run = run.report;
    if (log) {
      *log << std::fixed << std::setprecision(2) << "density " << density << ": " << d.throughput_fps << " fps, latency "
           << std::setprecision(3) << d.latency_s << " s over " << run.report.frames << " frames\n";
    }
    report.densities.push_back(std::move(d));
  }
  const auto densest = std::max_element(report.densities.begin(), report.densities.end(),
                                        [](const auto& a, const auto& b) { return a.density < b.density; });
  report.cloud = densest->cloud;
  report.end_to_end_s = densest->end_to_end_s;
  return report;
}

}  // namespace svs
