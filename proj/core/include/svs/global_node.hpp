#pragma once

// Global node: per-epoch feature anonymization, cross-camera identity
// assignment, behavioral flags and the append-only record store.

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "svs/domain.hpp"
#include "svs/edge.hpp"
#include "svs/error.hpp"

namespace svs {

inline constexpr TimestampMs kDefaultEpochLengthMs = 30 * 60 * kMsPerSecond;

struct ReIdConfig {
  std::size_t feature_dim = kDefaultFeatureDim;
  double similarity_threshold = 0.7;
  TimestampMs epoch_length_ms = kDefaultEpochLengthMs;
  std::uint64_t seed = 0x5eed;
  double behavior_threshold = 50.0;

  void validate() const;
};

struct BehaviorThreshold {
  double value = 50.0;

  explicit BehaviorThreshold(double v);
};

class StaleFeatureError : public Error {
 public:
  using Error::Error;
};

struct MatchResult {
  GlobalId global_id = 0;
  bool matched = false;
  double similarity = 0.0;  // best similarity seen, 0 for an empty gallery
};

enum class RotationOutcome { Rotated, NotDue };

struct GalleryEntry {
  GlobalId global_id = 0;
  FeatureVector feature;  // anonymized
};

// Anonymization key and gallery for one epoch. The transform is a random
// orthogonal matrix, so cosine similarity survives it exactly while the raw
// vector cannot be recovered once the matrix is wiped.
class ReIdState {
 public:
  // Fresh state for epoch 0 with a seeded random transform.
  ReIdState(const ReIdConfig& config, TimestampMs epoch_started);
  // Explicit transform (row-major D x D); throws ValidationError unless orthogonal.
  ReIdState(std::uint64_t epoch_id, TimestampMs epoch_started, std::vector<double> transform, std::size_t dim,
            GlobalId next_global_id = 1);
  ~ReIdState();

  ReIdState(const ReIdState&) = delete;
  ReIdState& operator=(const ReIdState&) = delete;
  ReIdState(ReIdState&&) noexcept = default;
  ReIdState& operator=(ReIdState&&) noexcept = default;

  std::uint64_t epoch_id() const noexcept { return epoch_id_; }
  TimestampMs epoch_started() const noexcept { return epoch_started_; }
  std::size_t dim() const noexcept { return dim_; }
  GlobalId next_global_id() const noexcept { return next_global_id_; }
  const std::vector<GalleryEntry>& gallery() const noexcept { return gallery_; }
  std::size_t gallery_size() const noexcept { return gallery_.size(); }

  // Max |(T^T T - I)_ij|.
  double orthogonality_error() const;

 private:
  friend FeatureVector transform_feature(const FeatureVector& raw, const ReIdState& state);
  friend MatchResult match_global(const FeatureVector& f, ReIdState& state, double similarity_threshold);
  friend RotationOutcome rotate_epoch(ReIdState& state, TimestampMs now, const ReIdConfig& config);
  friend void seed_gallery_for_test(ReIdState& state, std::vector<GalleryEntry> entries, GlobalId next_global_id);
  friend class GlobalNode;

  void wipe() noexcept;

  std::uint64_t epoch_id_ = 0;
  TimestampMs epoch_started_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> transform_;
  std::vector<GalleryEntry> gallery_;
  GlobalId next_global_id_ = 1;
};

// Seeded Haar-random orthogonal matrix, row-major.
std::vector<double> random_orthogonal(std::size_t dim, std::uint64_t seed);

FeatureVector transform_feature(const FeatureVector& raw, const ReIdState& state);

// Throws StaleFeatureError when f comes from another epoch.
MatchResult match_global(const FeatureVector& f, ReIdState& state, double similarity_threshold);

RotationOutcome rotate_epoch(ReIdState& state, TimestampMs now, const ReIdConfig& config);

// Test hook: replaces the gallery and id counter.
void seed_gallery_for_test(ReIdState& state, std::vector<GalleryEntry> entries, GlobalId next_global_id);

bool flag_behavioral(double score, BehaviorThreshold threshold);

// Append-only line-delimited store of GlobalRecord documents. Optionally
// mirrored to a file; readers take snapshots under a shared lock.
class RecordStore {
 public:
  RecordStore() = default;
  explicit RecordStore(const std::string& path);

  void append(const GlobalRecord& record);
  // Validates an arbitrary document against the record schema first.
  void append_document(const Json& doc);

  std::vector<GlobalRecord> records() const;
  std::vector<std::string> lines() const;
  std::string bytes() const;
  std::size_t size() const;

 private:
  void append_line(std::string line);

  mutable std::shared_mutex mutex_;
  std::vector<std::string> lines_;
  std::unique_ptr<std::ofstream> file_;
};

void persist_record(const GlobalRecord& record, RecordStore& store);

struct BatchResult {
  std::vector<GlobalRecord> records;
  std::vector<AnomalyEvent> events;
  bool rotated = false;
};

class GlobalNode {
 public:
  GlobalNode(ReIdConfig config, std::vector<std::string> cameras, RecordStore& store, TimestampMs start_time);

  BatchResult process_batch(const LocalBatch& batch);

  const ReIdState& state() const noexcept { return state_; }
  const ReIdConfig& config() const noexcept { return config_; }

 private:
  ReIdConfig config_;
  std::set<std::string, std::less<>> cameras_;
  RecordStore& store_;
  ReIdState state_;
};

}  // namespace svs
