#pragma once

// Statistical layer computed on the edge before anything is published:
// occupancy counts, distribution summaries, statistical anomalies, hourly
// box plots, the occupancy indicator, BEV projection and heat maps.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svs/domain.hpp"
#include "svs/error.hpp"

namespace svs {

struct OccupancySample {
  std::string camera_id;
  TimestampMs bucket_start = 0;
  std::uint64_t count = 0;
  friend bool operator==(const OccupancySample&, const OccupancySample&) = default;
};

// Distinct global ids per bucket, dense over the covered span (empty
// buckets emitted as 0). Records must be from one camera and time-sorted.
std::vector<OccupancySample> occupancy_series(std::span<const GlobalRecord> records, TimestampMs bucket_len);

struct DistributionStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

DistributionStats distribution_stats(std::span<const double> values);
DistributionStats distribution_stats(std::span<const OccupancySample> series);

// value > mean + 2 std, strictly.
bool statistical_anomaly(double value, double mean, double std);

// Linear interpolation between closest ranks, h = (n - 1) p + 1 (1-based).
// `sorted` must be ascending and non-empty.
double percentile_linear(std::span<const double> sorted, double p);

struct OccupancyStats {
  std::string camera_id;
  int hour_of_day = 0;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double max = 0.0;
};

// Box-plot summary of one group; nullopt for an empty group.
std::optional<OccupancyStats> summarize(std::span<const double> values, std::string camera_id = {}, int hour = 0);

int utc_hour_of_day(TimestampMs t);

using HourlyKey = std::pair<std::string, int>;
// Grouped by (camera, UTC hour). Hours without samples are absent.
std::map<HourlyKey, OccupancyStats> hourly_boxplot(std::span<const OccupancySample> history);

enum class OccupancyIndicator { Under, Normal, Over, Unknown };

std::string_view to_string(OccupancyIndicator indicator);
OccupancyIndicator occupancy_indicator_from_string(std::string_view text);

// Unknown without stats; Normal on the closed band [p25, p75].
OccupancyIndicator occupancy_indicator(double current, const std::optional<OccupancyStats>& stats);

class HorizonError : public Error {
 public:
  using Error::Error;
};

Point2 bev_project(Point2 p, const Homography& h);

struct HeatmapGrid {
  std::string camera_id;
  std::size_t cols = 1;
  std::size_t rows = 1;
  BevExtent extent;
  std::vector<std::uint64_t> cells;  // row-major, cols x rows
  std::uint64_t discarded = 0;       // points outside the half-open extent
  std::uint64_t version = 0;

  HeatmapGrid() = default;
  HeatmapGrid(std::string camera_id, std::size_t cols, std::size_t rows, BevExtent extent);

  std::uint64_t& at(std::size_t col, std::size_t row) { return cells[row * cols + col]; }
  std::uint64_t at(std::size_t col, std::size_t row) const { return cells[row * cols + col]; }
  std::uint64_t total() const noexcept;
  // Adds one point; returns false if it fell outside the extent.
  bool add(Point2 p);
};

HeatmapGrid heatmap_accumulate(std::span<const Point2> points, HeatmapGrid grid);

inline constexpr std::array<std::string_view, 8> kHeatmapExportKeys = {
    "camera_id", "ts_ms", "version", "cols", "rows", "extent", "cells", "discarded"};

Json export_heatmap(const HeatmapGrid& grid, TimestampMs ts_ms);
HeatmapGrid import_heatmap(const Json& doc);

struct SearchResult {
  std::uint64_t total = 0;
  double average = 0.0;
  std::uint64_t max = 0;
  std::uint64_t min = 0;
  std::uint64_t most_frequent = 0;
  std::size_t samples = 0;
  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

inline constexpr std::array<std::string_view, 6> kSearchResultKeys = {"total",         "average", "max", "min",
                                                                      "most_frequent", "samples"};

// Aggregates over samples with bucket_start in [t0, t1]. nullopt when the
// window holds no samples. Throws ValidationError when t0 > t1.
std::optional<SearchResult> search_aggregate(std::span<const OccupancySample> samples, TimestampMs t0, TimestampMs t1);

Json to_json(const SearchResult& r);

// Running mean/std of all prior samples (Welford), or of the last
// `rolling_window` samples when that is non-zero.
class OccupancyBaseline {
 public:
  explicit OccupancyBaseline(std::size_t rolling_window = 0) : rolling_window_(rolling_window) {}

  std::size_t count() const noexcept;
  DistributionStats stats() const;
  // Evaluates `value` against the history so far, then appends it.
  bool observe(double value);
  void add(double value);

 private:
  std::size_t rolling_window_;
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  std::deque<double> window_;
};

struct AnalyticsConfig {
  TimestampMs bucket_ms = 1000;
  std::size_t rolling_window = 0;
  // History needed before statistical anomalies are reported.
  std::size_t min_history = 60;
  std::size_t heatmap_cols = 32;
  std::size_t heatmap_rows = 32;
  // Heat map republished every this many buckets.
  std::size_t heatmap_every = 10;

  void validate() const;
};

inline constexpr std::array<std::string_view, 11> kAnalyticsMessageKeys = {
    "camera_id", "ts_ms", "count", "indicator", "mean", "std", "p25", "p75", "statistical_anomaly", "heatmap_version",
    "bev_points"};

struct AnalyticsUpdate {
  OccupancySample sample;
  OccupancyIndicator indicator = OccupancyIndicator::Unknown;
  DistributionStats baseline;
  bool statistical_anomaly = false;
  std::vector<Point2> bev_points;
  std::uint64_t heatmap_version = 0;
  bool heatmap_due = false;
  std::optional<OccupancyStats> hour_stats;

  Json publication() const;  // analytics/<camera_id> body
};

// Per-camera analytics state fed one occupancy bucket at a time.
class CameraAnalytics {
 public:
  CameraAnalytics(CameraConfig camera, AnalyticsConfig config);

  // `records` are the records persisted for this bucket.
  AnalyticsUpdate observe(TimestampMs bucket_start, std::span<const GlobalRecord> records);

  const HeatmapGrid& heatmap() const noexcept { return heatmap_; }
  const std::vector<OccupancySample>& history() const noexcept { return history_; }
  std::optional<OccupancyStats> hour_stats(int hour) const;

 private:
  CameraConfig camera_;
  AnalyticsConfig config_;
  OccupancyBaseline baseline_;
  std::array<std::vector<double>, 24> by_hour_;  // kept sorted
  std::vector<OccupancySample> history_;
  HeatmapGrid heatmap_;
  std::size_t buckets_since_heatmap_ = 0;
};

}  // namespace svs
