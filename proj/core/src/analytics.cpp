#include "svs/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace svs {
namespace {

TimestampMs floor_to(TimestampMs t, TimestampMs step) {
  TimestampMs q = t / step;
  if (t % step != 0 && t < 0) --q;
  return q * step;
}

}  // namespace

std::vector<OccupancySample> occupancy_series(std::span<const GlobalRecord> records, TimestampMs bucket_len) {
  if (bucket_len <= 0) throw ValidationError("bucket length must be positive");
  std::vector<OccupancySample> out;
  if (records.empty()) return out;
  const std::string& camera = records.front().camera_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].camera_id != camera) throw ValidationError("occupancy series mixes cameras");
    if (i > 0 && records[i].record_time < records[i - 1].record_time) {
      throw OrderingError("occupancy series input is not time-sorted");
    }
  }
  TimestampMs bucket = floor_to(records.front().record_time, bucket_len);
  std::set<GlobalId> ids;
  std::size_t i = 0;
  const TimestampMs last = floor_to(records.back().record_time, bucket_len);
  for (; bucket <= last; bucket += bucket_len) {
    ids.clear();
    while (i < records.size() && records[i].record_time < bucket + bucket_len) ids.insert(records[i++].global_id);
    out.push_back({camera, bucket, ids.size()});
  }
  return out;
}

DistributionStats distribution_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("distribution of an empty series");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(n)))};
}

DistributionStats distribution_stats(std::span<const OccupancySample> series) {
  std::vector<double> values;
  values.reserve(series.size());
  for (const auto& s : series) values.push_back(static_cast<double>(s.count));
  return distribution_stats(values);
}

bool statistical_anomaly(double value, double mean, double std) {
  if (std < 0.0) throw ValidationError("standard deviation must be non-negative");
  return value > mean + 2.0 * std;
}

double percentile_linear(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("percentile of an empty series");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile rank outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;  // 0-based
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::optional<OccupancyStats> summarize(std::span<const double> values, std::string camera_id, int hour) {
  if (values.empty()) return std::nullopt;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto dist = distribution_stats(sorted);
  OccupancyStats s;
  s.camera_id = std::move(camera_id);
  s.hour_of_day = hour;
  s.n = sorted.size();
  s.mean = dist.mean;
  s.std = dist.std;
  s.min = sorted.front();
  s.p25 = percentile_linear(sorted, 0.25);
  s.p75 = percentile_linear(sorted, 0.75);
  s.max = sorted.back();
  return s;
}

int utc_hour_of_day(TimestampMs t) {
  TimestampMs in_day = t % kMsPerDay;
  if (in_day < 0) in_day += kMsPerDay;
  return static_cast<int>(in_day / kMsPerHour);
}

std::map<HourlyKey, OccupancyStats> hourly_boxplot(std::span<const OccupancySample> history) {
  std::map<HourlyKey, std::vector<double>> groups;
  for (const auto& s : history) {
    groups[{s.camera_id, utc_hour_of_day(s.bucket_start)}].push_back(static_cast<double>(s.count));
  }
  std::map<HourlyKey, OccupancyStats> out;
  for (auto& [key, values] : groups) {
    if (auto stats = summarize(values, key.first, key.second)) out.emplace(key, std::move(*stats));
  }
  return out;
}

std::string_view to_string(OccupancyIndicator indicator) {
  switch (indicator) {
    case OccupancyIndicator::Under:
      return "Under";
    case OccupancyIndicator::Normal:
      return "Normal";
    case OccupancyIndicator::Over:
      return "Over";
    case OccupancyIndicator::Unknown:
      break;
  }
  return "Unknown";
}

OccupancyIndicator occupancy_indicator_from_string(std::string_view text) {
  if (text == "Under") return OccupancyIndicator::Under;
  if (text == "Normal") return OccupancyIndicator::Normal;
  if (text == "Over") return OccupancyIndicator::Over;
  if (text == "Unknown") return OccupancyIndicator::Unknown;
  throw ValidationError("unknown indicator '" + std::string(text) + "'");
}

OccupancyIndicator occupancy_indicator(double current, const std::optional<OccupancyStats>& stats) {
  if (!stats) return OccupancyIndicator::Unknown;
  if (current < stats->p25) return OccupancyIndicator::Under;
  if (current > stats->p75) return OccupancyIndicator::Over;
  return OccupancyIndicator::Normal;
}

Point2 bev_project(Point2 p, const Homography& h) {
  const double d = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  if (!(std::abs(d) > 1e-12)) throw HorizonError("point maps to the horizon line");
  return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / d, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / d};
}

HeatmapGrid::HeatmapGrid(std::string camera, std::size_t c, std::size_t r, BevExtent e)
    : camera_id(std::move(camera)), cols(c), rows(r), extent(e) {
  if (cols == 0 || rows == 0) throw ValidationError("heat map dimensions must be positive");
  extent.validate();
  cells.assign(cols * rows, 0);
}

std::uint64_t HeatmapGrid::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto c : cells) sum += c;
  return sum;
}

bool HeatmapGrid::add(Point2 p) {
  if (!(p.x >= extent.x_min && p.x < extent.x_max && p.y >= extent.y_min && p.y < extent.y_max)) {
    ++discarded;
    return false;
  }
  const double fx = (p.x - extent.x_min) / (extent.x_max - extent.x_min);
  const double fy = (p.y - extent.y_min) / (extent.y_max - extent.y_min);
  const auto col = std::min(cols - 1, static_cast<std::size_t>(fx * static_cast<double>(cols)));
  const auto row = std::min(rows - 1, static_cast<std::size_t>(fy * static_cast<double>(rows)));
  ++at(col, row);
  return true;
}

HeatmapGrid heatmap_accumulate(std::span<const Point2> points, HeatmapGrid grid) {
  if (grid.cols == 0 || grid.rows == 0 || grid.cells.size() != grid.cols * grid.rows) {
    throw ValidationError("heat map grid is malformed");
  }
  for (const auto& p : points) grid.add(p);
  return grid;
}

Json export_heatmap(const HeatmapGrid& grid, TimestampMs ts_ms) {
  const auto& e = grid.extent;
  return Json{{"camera_id", grid.camera_id},
              {"ts_ms", ts_ms},
              {"version", grid.version},
              {"cols", grid.cols},
              {"rows", grid.rows},
              {"extent", {e.x_min, e.y_min, e.x_max, e.y_max}},
              {"cells", grid.cells},
              {"discarded", grid.discarded}};
}

HeatmapGrid import_heatmap(const Json& doc) {
  require_allowed_keys(doc, std::span<const std::string_view>(kHeatmapExportKeys), "heat map");
  const auto e = doc.at("extent").get<std::vector<double>>();
  if (e.size() != 4) throw ValidationError("heat map extent must have four entries");
  HeatmapGrid grid(doc.value("camera_id", std::string{}), doc.at("cols").get<std::size_t>(),
                   doc.at("rows").get<std::size_t>(), BevExtent{e[0], e[1], e[2], e[3]});
  grid.cells = doc.at("cells").get<std::vector<std::uint64_t>>();
  if (grid.cells.size() != grid.cols * grid.rows) throw ValidationError("heat map cells do not match cols x rows");
  grid.discarded = doc.value("discarded", std::uint64_t{0});
  grid.version = doc.value("version", std::uint64_t{0});
  return grid;
}

std::optional<SearchResult> search_aggregate(std::span<const OccupancySample> samples, TimestampMs t0,
                                             TimestampMs t1) {
  if (t0 > t1) throw ValidationError("search window start is after its end");
  SearchResult r;
  std::unordered_map<std::uint64_t, std::size_t> freq;
  for (const auto& s : samples) {
    if (s.bucket_start < t0 || s.bucket_start > t1) continue;
    if (r.samples == 0) {
      r.max = r.min = s.count;
    } else {
      r.max = std::max(r.max, s.count);
      r.min = std::min(r.min, s.count);
    }
    r.total += s.count;
    ++r.samples;
    ++freq[s.count];
  }
  if (r.samples == 0) return std::nullopt;
  r.average = static_cast<double>(r.total) / static_cast<double>(r.samples);
  std::size_t best = 0;
  for (const auto& [value, n] : freq) {
    if (n > best || (n == best && value < r.most_frequent)) {
      best = n;
      r.most_frequent = value;
    }
  }
  return r;
}

Json to_json(const SearchResult& r) {
  return Json{{"total", r.total},     {"average", r.average},         {"max", r.max},
              {"min", r.min},         {"most_frequent", r.most_frequent}, {"samples", r.samples}};
}

std::size_t OccupancyBaseline::count() const noexcept { return rolling_window_ ? window_.size() : n_; }

DistributionStats OccupancyBaseline::stats() const {
  if (rolling_window_) {
    if (window_.empty()) throw ValidationError("baseline has no history");
    return distribution_stats(std::vector<double>(window_.begin(), window_.end()));
  }
  if (n_ == 0) throw ValidationError("baseline has no history");
  return {mean_, std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_)))};
}

bool OccupancyBaseline::observe(double value) {
  const bool flagged = count() > 0 && [&] {
    const auto s = stats();
    return statistical_anomaly(value, s.mean, s.std);
  }();
  add(value);
  return flagged;
}

void OccupancyBaseline::add(double value) {
  if (rolling_window_) {
    window_.push_back(value);
    if (window_.size() > rolling_window_) window_.pop_front();
    return;
  }
  ++n_;
  const double delta = value - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (value - mean_);
}

void AnalyticsConfig::validate() const {
  if (bucket_ms <= 0) throw ConfigError("bucket_ms must be positive");
  if (heatmap_cols == 0 || heatmap_rows == 0) throw ConfigError("heat map dimensions must be positive");
  if (heatmap_every == 0) throw ConfigError("heatmap_every must be positive");
}

Json AnalyticsUpdate::publication() const {
  Json points = Json::array();
  for (const auto& p : bev_points) points.push_back({p.x, p.y});
  Json body{{"camera_id", sample.camera_id},
            {"ts_ms", sample.bucket_start},
            {"count", sample.count},
            {"indicator", std::string(to_string(indicator))},
            {"mean", baseline.mean},
            {"std", baseline.std},
            {"p25", hour_stats ? Json(hour_stats->p25) : Json(nullptr)},
            {"p75", hour_stats ? Json(hour_stats->p75) : Json(nullptr)},
            {"statistical_anomaly", statistical_anomaly},
            {"heatmap_version", heatmap_version},
            {"bev_points", std::move(points)}};
  return body;
}

CameraAnalytics::CameraAnalytics(CameraConfig camera, AnalyticsConfig config)
    : camera_(std::move(camera)),
      config_(config),
      baseline_(config.rolling_window),
      heatmap_(camera_.camera_id, config.heatmap_cols, config.heatmap_rows, camera_.bev_extent) {
  camera_.validate();
  config_.validate();
}

std::optional<OccupancyStats> CameraAnalytics::hour_stats(int hour) const {
  return summarize(by_hour_.at(static_cast<std::size_t>(hour)), camera_.camera_id, hour);
}

AnalyticsUpdate CameraAnalytics::observe(TimestampMs bucket_start, std::span<const GlobalRecord> records) {
  AnalyticsUpdate up;
  std::set<GlobalId> ids;
  for (const auto& r : records) {
    if (r.camera_id != camera_.camera_id) throw ValidationError("record from another camera");
    ids.insert(r.global_id);
    try {
      const Point2 bev = bev_project(bbox_foot_point(r.bbox_tlwh), camera_.homography);
      up.bev_points.push_back(bev);
      heatmap_.add(bev);
    } catch (const HorizonError&) {
      ++heatmap_.discarded;
    }
  }
  up.sample = {camera_.camera_id, bucket_start, ids.size()};
  const double value = static_cast<double>(up.sample.count);

  const int hour = utc_hour_of_day(bucket_start);
  up.hour_stats = hour_stats(hour);
  up.indicator = occupancy_indicator(value, up.hour_stats);

  const bool enough = baseline_.count() >= std::max<std::size_t>(1, config_.min_history);
  if (baseline_.count() > 0) up.baseline = baseline_.stats();
  up.statistical_anomaly = enough && statistical_anomaly(value, up.baseline.mean, up.baseline.std);
  baseline_.add(value);

  auto& bucket = by_hour_[static_cast<std::size_t>(hour)];
  bucket.insert(std::upper_bound(bucket.begin(), bucket.end(), value), value);
  history_.push_back(up.sample);

  if (++buckets_since_heatmap_ >= config_.heatmap_every) {
    buckets_since_heatmap_ = 0;
    ++heatmap_.version;
    up.heatmap_due = true;
  }
  up.heatmap_version = heatmap_.version;
  return up;
}

}  // namespace svs
