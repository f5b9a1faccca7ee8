#pragma once

// Density sweep: generate a scenario per density, run the pipeline over it,
// then time API round trips against the resulting store.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "svs/api/service.hpp"
#include "svs/pipeline.hpp"
#include "svs/scenario.hpp"

namespace svs {

// Published edge figures, printed beside the measured ones. They come from
// a multi-GPU server and are not expected to match desk hardware.
struct ReferencePoint {
  double density;
  double throughput_fps;
  double latency_s;
};
inline constexpr std::array<ReferencePoint, 3> kReferencePoints = {{
    {70.0, 52.94, 5.39},
    {216.0, 40.16, 15.66},
    {744.0, 17.80, 36.04},
}};
inline constexpr double kReferenceEndToEndS = 36.1;
inline constexpr double kReferenceCloudS = 0.06;

struct BenchOptions {
  std::vector<double> densities = {70.0, 216.0, 744.0};
  double duration_s = 60.0;
  double fps = 30.0;
  std::uint64_t seed = 1;
  std::size_t api_requests = 200;
  std::string work_dir;  // traces go here; empty: system temp directory
  bool keep_traces = false;
  PipelineConfig pipeline;
};

struct CloudTimings {
  double gateway_ms = 0.0;
  double store_ms = 0.0;
  double api_ms = 0.0;
  double seconds() const { return (gateway_ms + store_ms + api_ms) / 1000.0; }
};

struct DensityResult {
  double density = 0.0;
  double trace_density = 0.0;  // generated detections/s per camera
  double throughput_fps = 0.0;
  double latency_s = 0.0;
  double latency_max_s = 0.0;
  CloudTimings cloud;
  double end_to_end_s = 0.0;
  RunReport run;
};

struct BenchReport {
  std::vector<DensityResult> densities;
  CloudTimings cloud;          // of the densest run
  double end_to_end_s = 0.0;   // of the densest run
  std::string hardware;
  double duration_s = 0.0;
  double fps = 0.0;

  bool throughput_non_increasing() const;
};

Json to_json(const BenchReport& r);
// Human-readable table with the published figures alongside.
std::string format_bench_report(const BenchReport& r);
std::string hardware_description();

// Mean wall time of `requests` authenticated GETs across the read endpoints,
// served over loopback HTTP.
double measure_api_ms(const api::ApiService& service, std::size_t requests);

// `log`, when given, receives one progress line per density.
BenchReport run_bench(const BenchOptions& options, std::ostream* log = nullptr);

}  // namespace svs
