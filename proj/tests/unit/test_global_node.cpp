#include <doctest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "svs/global_node.hpp"

using namespace svs;

namespace {

std::vector<double> identity(std::size_t d) {
  std::vector<double> m(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 1.0;
  return m;
}

ReIdConfig small_config(std::size_t dim = 16) {
  ReIdConfig c;
  c.feature_dim = dim;
  c.seed = 99;
  return c;
}

LocalBatch batch_of(const std::string& cam, TimeWindow w, std::vector<FeatureVector> features,
                    std::vector<double> scores = {}) {
  LocalBatch b;
  b.camera_id = cam;
  b.window = w;
  LocalId id = 1;
  for (auto& f : features) {
    BatchEntry e;
    e.local_id = id++;
    e.best = fixture::person({10, 10, 20, 40});
    e.feature = std::move(f);
    e.record_time = w.start;
    e.bbox_tlwh = {10, 10, 20, 40};
    b.entries.push_back(std::move(e));
  }
  std::uint64_t frame = 0;
  for (double s : scores) b.frames.push_back({frame++, w.start + TimestampMs(frame), s, {"violence"}, {}});
  return b;
}

}  // namespace

TEST_CASE("transform feature") {
  ReIdState id_state(0, 0, identity(3), 3);
  const FeatureVector in{{1, 2, 3}, 0};
  CHECK(transform_feature(in, id_state).values == in.values);

  ReIdState perm(0, 0, {0, 1, 0, 1, 0, 0, 0, 0, 1}, 3);
  CHECK(transform_feature(in, perm).values == std::vector<double>{2, 1, 3});

  CHECK_THROWS_AS(transform_feature(FeatureVector{{1, 2}, 0}, perm), ValidationError);
  CHECK_THROWS_AS(ReIdState(0, 0, {1, 1, 0, 1, 0, 0, 0, 0, 1}, 3), ValidationError);
}

TEST_CASE("random orthogonal transforms preserve norms and cosines") {
  ReIdState s(small_config(64), 0);
  CHECK(s.orthogonality_error() < 1e-6);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto u = fixture::random_unit(64, rng), v = fixture::random_unit(64, rng);
    for (auto& x : u.values) x *= 3.5;
    const auto tu = transform_feature(u, s), tv = transform_feature(v, s);
    CHECK(std::abs(tu.norm() - u.norm()) / u.norm() < 1e-6);
    CHECK(std::abs(cosine_similarity(tu, tv) - cosine_similarity(u, v)) < 1e-6);
    CHECK(tu.epoch_id == s.epoch_id());
  }
  CHECK(random_orthogonal(8, 5) == random_orthogonal(8, 5));
  CHECK(random_orthogonal(8, 5) != random_orthogonal(8, 6));
}

TEST_CASE("match global") {
  ReIdState s(0, 0, identity(2), 2);
  const FeatureVector a{{1, 0}, 0};
  auto r = match_global(a, s, 0.7);
  CHECK(r.global_id == 1);
  CHECK_FALSE(r.matched);
  CHECK(s.gallery_size() == 1);

  r = match_global(a, s, 0.7);
  CHECK(r.global_id == 1);
  CHECK(r.matched);

  const FeatureVector diag{{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)}, 0};
  r = match_global(diag, s, 0.8);
  CHECK_FALSE(r.matched);
  CHECK(r.global_id == 2);
  CHECK(r.similarity == doctest::Approx(0.70710678));

  CHECK_THROWS_AS(match_global(FeatureVector{{1, 0}, 3}, s, 0.7), StaleFeatureError);
}

TEST_CASE("match ties go to the lowest id and refresh the stored vector") {
  ReIdState s(0, 0, identity(2), 2);
  seed_gallery_for_test(s, {{7, {{1, 0}, 0}}, {4, {{1, 0}, 0}}}, 8);
  const FeatureVector q{{0.9, 0.1}, 0};
  const auto r = match_global(q, s, 0.5);
  CHECK(r.global_id == 4);
  CHECK(s.gallery()[1].feature == q);
}

TEST_CASE("rotation") {
  const auto cfg = small_config(4);
  ReIdState s(0, 0, identity(4), 4);
  std::vector<GalleryEntry> five;
  for (GlobalId i = 1; i <= 5; ++i) five.push_back({i, fixture::unit_feature(4, i)});
  seed_gallery_for_test(s, five, 17);

  CHECK(rotate_epoch(s, 29 * 60 * 1000, cfg) == RotationOutcome::NotDue);
  CHECK(s.gallery_size() == 5);
  CHECK(rotate_epoch(s, 30 * 60 * 1000, cfg) == RotationOutcome::Rotated);
  CHECK(s.gallery_size() == 0);
  CHECK(s.next_global_id() == 17);
  CHECK(s.epoch_id() == 1);
  CHECK(s.orthogonality_error() < 1e-6);
}

TEST_CASE("no pre-rotation id survives rotation") {
  const auto cfg = small_config(32);
  ReIdState s(cfg, 0);
  std::mt19937_64 rng(2);
  std::vector<FeatureVector> raws;
  std::set<GlobalId> before;
  for (int i = 0; i < 20; ++i) {
    raws.push_back(fixture::random_unit(32, rng));
    before.insert(match_global(transform_feature(raws.back(), s), s, 0.7).global_id);
  }
  rotate_epoch(s, cfg.epoch_length_ms, cfg);
  for (const auto& raw : raws) {
    CHECK_FALSE(before.contains(match_global(transform_feature(raw, s), s, -1.0).global_id));
  }
}

TEST_CASE("behavioral flag") {
  CHECK(flag_behavioral(80, BehaviorThreshold(50)));
  CHECK(flag_behavioral(50, BehaviorThreshold(50)));
  CHECK_FALSE(flag_behavioral(0, BehaviorThreshold(50)));
  CHECK_THROWS_AS(flag_behavioral(101, BehaviorThreshold(50)), ValidationError);
  CHECK_THROWS_AS(BehaviorThreshold(-1), ValidationError);
}

TEST_CASE("record store") {
  fixture::TempDir dir("records");
  const auto path = dir.file("records.jsonl");
  GlobalRecord r{3, 1000, "cam-1", {1, 2, 3, 4}, 10, {}, {"bag"}};
  {
    RecordStore store(path);
    persist_record(r, store);
    CHECK(store.records() == std::vector<GlobalRecord>{r});
    CHECK(store.bytes() == serialize_record(r) + "\n");

    auto bad = to_json(r);
    bad["anomaly_score"] = 120;
    CHECK_THROWS(store.append_document(bad));
    bad = to_json(r);
    bad["face_id"] = 5;
    CHECK_THROWS(store.append_document(bad));
    CHECK(store.size() == 1);
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(parse_record(line) == r);
}

TEST_CASE("process batch") {
  const auto cfg = small_config(16);
  RecordStore store;
  std::mt19937_64 rng(4);
  const auto raw = fixture::random_unit(16, rng);

  SUBCASE("same person on two cameras shares a global id") {
    GlobalNode node(cfg, {"cam-1", "cam-2"}, store, 0);
    const auto a = node.process_batch(batch_of("cam-1", {0, 1000}, {raw}));
    const auto b = node.process_batch(batch_of("cam-2", {0, 1000}, {raw}));
    CHECK(a.records.at(0).global_id == b.records.at(0).global_id);
    CHECK(store.size() == 2);
  }
  SUBCASE("rotation separates identities") {
    GlobalNode node(cfg, {"cam-1"}, store, 0);
    const auto a = node.process_batch(batch_of("cam-1", {0, 1000}, {raw}));
    const TimestampMs later = cfg.epoch_length_ms;
    const auto b = node.process_batch(batch_of("cam-1", {later, later + 1000}, {raw}));
    CHECK(b.rotated);
    CHECK(a.records.at(0).global_id != b.records.at(0).global_id);
  }
  SUBCASE("high frame score raises one behavioral event") {
    GlobalNode node(cfg, {"cam-1"}, store, 0);
    const auto r = node.process_batch(batch_of("cam-1", {0, 1000}, {}, {10, 90, 70}));
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].kind == AnomalyKind::Behavioral);
    CHECK(r.events[0].value == 90);
    CHECK(r.events[0].category == "violence");
    CHECK(node.process_batch(batch_of("cam-1", {1000, 2000}, {}, {10, 20})).events.empty());
  }
  SUBCASE("unknown camera is rejected") {
    GlobalNode node(cfg, {"cam-1"}, store, 0);
    CHECK_THROWS_AS(node.process_batch(batch_of("cam-9", {0, 1000}, {raw})), ValidationError);
  }
  SUBCASE("ids strictly increase and records keep seven keys") {
    GlobalNode node(cfg, {"cam-1"}, store, 0);
    std::vector<FeatureVector> people;
    for (int i = 0; i < 10; ++i) people.push_back(fixture::random_unit(16, rng));
    node.process_batch(batch_of("cam-1", {0, 1000}, people));
    GlobalId last = 0;
    for (const auto& line : store.lines()) {
      const auto doc = Json::parse(line);
      CHECK(doc.size() == 7);
      const auto id = doc["global_id"].get<GlobalId>();
      CHECK(id > last);
      last = id;
    }
  }
}
