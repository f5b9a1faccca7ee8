#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "svs/analytics.hpp"
#include "svs/gateway/kv_store.hpp"
#include "svs/gateway/select.hpp"
#include "svs/gateway/topic.hpp"
#include "svs/global_node.hpp"
#include "svs/scenario.hpp"
#include "svs/trace.hpp"

namespace {

using namespace svs;

FeatureVector random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  FeatureVector f;
  f.values.resize(dim);
  double n2 = 0;
  for (auto& v : f.values) {
    v = g(rng);
    n2 += v * v;
  }
  for (auto& v : f.values) v /= std::sqrt(n2);
  return f;
}

void BM_BboxIou(benchmark::State& state) {
  const BBoxTlwh a{10, 20, 50, 120};
  const BBoxTlwh b{30, 40, 50, 120};
  for (auto _ : state) benchmark::DoNotOptimize(bbox_iou(a, b));
}
BENCHMARK(BM_BboxIou);

void BM_RandomOrthogonal(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(random_orthogonal(dim, seed++));
}
BENCHMARK(BM_RandomOrthogonal)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_TransformFeature(benchmark::State& state) {
  ReIdConfig cfg;
  ReIdState st(cfg, 0);
  std::mt19937_64 rng(7);
  const auto probe = random_unit(cfg.feature_dim, rng);
  for (auto _ : state) benchmark::DoNotOptimize(transform_feature(probe, st));
}
BENCHMARK(BM_TransformFeature);

// Every probe is new, so each call scans the whole gallery and then grows it.
void BM_MatchNewIdentity(benchmark::State& state) {
  ReIdConfig cfg;
  ReIdState st(cfg, 0);
  std::mt19937_64 rng(11);
  for (auto _ : state) {
    state.PauseTiming();
    const auto f = transform_feature(random_unit(cfg.feature_dim, rng), st);
    state.ResumeTiming();
    benchmark::DoNotOptimize(match_global(f, st, 0.7));
  }
}
BENCHMARK(BM_MatchNewIdentity)->Iterations(2000);

void BM_TopicMatch(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(gateway::match_topic("anomaly/+", "anomaly/cam-1"));
    benchmark::DoNotOptimize(gateway::match_topic("a/#", "a/b/c/d"));
  }
}
BENCHMARK(BM_TopicMatch);

void BM_SelectEvaluate(benchmark::State& state) {
  const auto stmt = gateway::parse_select("SELECT message, value FROM 'anomaly/+' WHERE kind = 'Behavioral' AND value >= 50");
  const Json msg{{"kind", "Behavioral"}, {"value", 90.0}, {"message", "m"}, {"camera_id", "cam-1"}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(gateway::evaluate(*stmt.where, msg));
    benchmark::DoNotOptimize(gateway::project(stmt, msg));
  }
}
BENCHMARK(BM_SelectEvaluate);

void BM_KvRange(benchmark::State& state) {
  gateway::KvStore kv;
  kv.create_table("counts", gateway::TableKind::Counts);
  for (TimestampMs t = 0; t < 86'400; ++t) kv.put("counts", {"cam-1", t * 1000}, Json{{"count", t % 17}});
  for (auto _ : state) benchmark::DoNotOptimize(kv.range("counts", "cam-1", 3'600'000, 3'600'000 + state.range(0) * 1000));
}
BENCHMARK(BM_KvRange)->Arg(60)->Arg(3600);

void BM_TraceDecode(benchmark::State& state) {
  ScenarioConfig cfg;
  cfg.duration_s = 1;
  cfg.target_density = static_cast<double>(state.range(0)) * cfg.fps;
  cfg.cameras.push_back(default_camera());
  std::ostringstream os;
  generate_scenario(cfg, os);
  const std::string text = os.str();
  for (auto _ : state) {
    std::istringstream in(text);
    TraceReader reader(in);
    std::size_t n = 0;
    while (auto obs = reader.next()) n += obs->detections.size();
    benchmark::DoNotOptimize(n);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.frames_per_camera()));
}
BENCHMARK(BM_TraceDecode)->Arg(2)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_Percentile(benchmark::State& state) {
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(3);
  for (auto& x : v) x = static_cast<double>(rng() % 50);
  std::sort(v.begin(), v.end());
  for (auto _ : state) {
    benchmark::DoNotOptimize(percentile_linear(v, 0.25));
    benchmark::DoNotOptimize(percentile_linear(v, 0.75));
  }
}
BENCHMARK(BM_Percentile)->Arg(3600);

}  // namespace

BENCHMARK_MAIN();
