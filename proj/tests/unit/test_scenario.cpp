#include <doctest.h>

#include <sstream>

#include "svs/scenario.hpp"
#include "svs/trace.hpp"

using namespace svs;

namespace {

ScenarioConfig small(double density = 70.0, double duration = 60.0) {
  ScenarioConfig cfg;
  cfg.seed = 11;
  cfg.duration_s = duration;
  cfg.target_density = density;
  cfg.feature_dim = 16;
  cfg.cameras.push_back(default_camera());
  return cfg;
}

std::string generate(const ScenarioConfig& cfg, std::string* labels = nullptr) {
  std::ostringstream trace, lab;
  generate_scenario(cfg, trace, labels ? &lab : nullptr);
  if (labels) *labels = lab.str();
  return trace.str();
}

}  // namespace

TEST_CASE("density lands within five percent of the target") {
  for (double density : {70.0, 216.0, 25.0}) {
    CAPTURE(density);
    auto cfg = small(density);
    std::ostringstream trace;
    const auto stats = generate_scenario(cfg, trace);
    CHECK(stats.frames == 1800);
    CHECK(stats.detections_per_second == doctest::Approx(density).epsilon(0.05));

    std::istringstream in(trace.str());
    const auto frames = ingest_trace(in, {cfg.feature_dim});
    std::size_t dets = 0;
    for (const auto& f : frames) dets += f.detections.size();
    CHECK(dets == stats.detections);
    CHECK(static_cast<double>(dets) / 1800.0 == doctest::Approx(density / 30.0).epsilon(0.05));
  }
}

TEST_CASE("same seed, same bytes") {
  auto cfg = small(70.0, 10.0);
  const auto a = generate(cfg), b = generate(cfg);
  CHECK(a == b);
  cfg.seed = 12;
  CHECK(generate(cfg) != a);
}

TEST_CASE("behavioral injection is carried by the frames it covers") {
  auto cfg = small(70.0, 20.0);
  cfg.anomaly_injections.push_back({10.0, AnomalyKind::Behavioral, "violence", 90.0, 1.0});
  std::string labels;
  std::istringstream in(generate(cfg, &labels));
  const auto frames = ingest_trace(in, {cfg.feature_dim});
  std::istringstream lab(labels);
  std::size_t flagged = 0;
  for (const auto& f : frames) {
    int label = -1;
    lab >> label;
    const double t = static_cast<double>(f.record_time - cfg.start_ms) / 1000.0;
    const bool inside = t >= 10.0 - 1e-9 && t < 11.0;
    CAPTURE(t);
    CHECK(label == (inside ? 1 : 0));
    if (inside) {
      ++flagged;
      CHECK(f.frame_anomaly_score == 90.0);
      CHECK(f.actions == std::vector<std::string>{"violence"});
    } else {
      CHECK(f.frame_anomaly_score <= cfg.walkers.base_score_max);
    }
  }
  CHECK(flagged == 30);
}

TEST_CASE("statistical injection adds people") {
  auto cfg = small(30.0, 20.0);
  AnomalyInjection burst;
  burst.time_s = 5.0;
  burst.kind = AnomalyKind::Statistical;
  burst.duration_s = 2.0;
  burst.extra_people = 10;
  cfg.anomaly_injections.push_back(burst);
  std::istringstream in(generate(cfg));
  const auto frames = ingest_trace(in, {cfg.feature_dim});
  CHECK(frames[4 * 30].detections.size() <= 2);
  CHECK(frames[6 * 30].detections.size() >= 10);
}

TEST_CASE("invalid scenarios are rejected") {
  auto cfg = small();
  cfg.fps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small(1e6);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.anomaly_injections.push_back({60.0, AnomalyKind::Behavioral, "violence", 90.0});
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.anomaly_injections.push_back({1.0, AnomalyKind::Behavioral, "", 90.0});
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.cameras.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(scenario_from_json(Json::array()), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("config round trips through json") {
  auto cfg = small(120.0, 30.0);
  cfg.anomaly_injections.push_back({3.5, AnomalyKind::Behavioral, "violence", 88.0, 2.0, "cam-1"});
  const auto back = scenario_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(generate(back) == generate(cfg));

  const auto defaults = scenario_from_json(Json::object());
  CHECK(defaults.cameras.size() == 1);
  CHECK(defaults.target_density == 70.0);
}
