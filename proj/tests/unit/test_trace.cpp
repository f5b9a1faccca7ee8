#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "svs/error.hpp"
#include "svs/trace.hpp"

using namespace svs;

namespace {

std::string line(std::uint64_t frame, TimestampMs ts, const std::string& cam = "cam-1", double score = 0) {
  Json doc{{"frame", frame}, {"ts_ms", ts}, {"camera_id", cam}, {"detections", Json::array()},
           {"frame_anomaly_score", score}, {"actions", Json::array()}, {"objects", Json::array()}};
  return doc.dump() + "\n";
}

TraceOptions dim(std::size_t d) { return TraceOptions{d}; }

}  // namespace

TEST_CASE("three valid lines give three observations in order") {
  std::istringstream in(line(0, 100) + line(1, 133) + line(2, 166));
  const auto obs = ingest_trace(in);
  REQUIRE(obs.size() == 3);
  CHECK(obs[0].frame_index == 0);
  CHECK(obs[1].record_time == 133);
  CHECK(obs[2].frame_index == 2);
}

TEST_CASE("score out of range is rejected with its line number") {
  std::istringstream in(line(0, 100) + line(1, 133, "cam-1", 120));
  TraceReader reader(in);
  CHECK(reader.next());
  try {
    reader.next();
    FAIL("expected a range error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("image-like keys are a privacy rejection") {
  auto doc = Json::parse(line(0, 0));
  doc["image"] = "aGVsbG8=";
  std::istringstream in(doc.dump() + "\n");
  CHECK_THROWS_AS(ingest_trace(in), PrivacyError);

  auto nested = Json::parse(line(0, 0));
  nested["detections"] = Json::array({Json{{"class", "person"}, {"conf", 0.9}, {"tlwh", {0, 0, 1, 1}},
                                           {"frame_data", Json::array({1, 2, 3})}}});
  std::istringstream in2(nested.dump() + "\n");
  CHECK_THROWS_AS(ingest_trace(in2), PrivacyError);
}

TEST_CASE("unknown keys are rejected") {
  auto doc = Json::parse(line(0, 0));
  doc["weather"] = "sunny";
  std::istringstream in(doc.dump() + "\n");
  CHECK_THROWS_AS(ingest_trace(in), PrivacyError);
}

TEST_CASE("malformed line names the line") {
  std::istringstream in(line(0, 0) + "{not json\n");
  try {
    ingest_trace(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("frame index must increase per camera") {
  std::istringstream ok(line(5, 0, "a") + line(1, 10, "b") + line(6, 20, "a"));
  CHECK(ingest_trace(ok).size() == 3);
  std::istringstream bad(line(5, 0, "a") + line(5, 10, "a"));
  CHECK_THROWS_AS(ingest_trace(bad), OrderingError);
  std::istringstream back_in_time(line(5, 100, "a") + line(6, 50, "a"));
  CHECK_THROWS_AS(ingest_trace(back_in_time), OrderingError);
}

TEST_CASE("blank lines are skipped") {
  std::istringstream in("\n" + line(0, 0) + "   \n" + line(1, 1));
  CHECK(ingest_trace(in).size() == 2);
}

TEST_CASE("observations round trip and decoding is deterministic") {
  auto obs = fixture::frame("cam-2", 9, 12345,
                            {fixture::person({1, 2, 3, 4}, 0.8, fixture::unit_feature(4, 1), 0.5),
                             fixture::person({10, 20, 30, 40}, 0.7)},
                            42.5);
  obs.actions = {"abandoned object"};
  obs.objects = {"bag"};
  obs.detections[1].pose.reset();
  const auto text = serialize_observation(obs) + "\n";
  std::istringstream a(text), b(text);
  const auto first = ingest_trace(a, dim(4));
  const auto second = ingest_trace(b, dim(4));
  REQUIRE(first.size() == 1);
  CHECK(first[0] == obs);
  CHECK(first == second);
}

TEST_CASE("feature dimension is enforced") {
  auto obs = fixture::frame("cam-1", 0, 0, {fixture::person({1, 2, 3, 4}, 0.8, fixture::unit_feature(4, 1))});
  std::istringstream in(serialize_observation(obs) + "\n");
  CHECK_THROWS_AS(ingest_trace(in, dim(8)), ValidationError);
}
