#pragma once

// Line-delimited detector traces: one JSON document per frame. This is the
// only way observations enter the system, and the reader enforces a strict
// key allow-list so that no imagery can be smuggled in.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svs/domain.hpp"

namespace svs {

struct TraceOptions {
  std::size_t feature_dim = kDefaultFeatureDim;
};

class TraceReader {
 public:
  explicit TraceReader(std::istream& in, TraceOptions options = {});

  // Next observation in file order, or nullopt at end of input.
  // Throws ParseError, ValidationError, OrderingError or PrivacyError; every
  // message carries the 1-based line number.
  std::optional<FrameObservation> next();

  std::size_t line() const noexcept { return line_; }

 private:
  FrameObservation decode(const Json& doc) const;

  std::istream& in_;
  TraceOptions options_;
  std::size_t line_ = 0;
  std::string buffer_;
  struct CameraCursor {
    std::uint64_t frame_index;
    TimestampMs record_time;
  };
  std::map<std::string, CameraCursor, std::less<>> cursors_;
};

std::vector<FrameObservation> ingest_trace(std::istream& in, TraceOptions options = {});

Json to_trace_json(const FrameObservation& obs);
std::string serialize_observation(const FrameObservation& obs);

}  // namespace svs
