#include "svs/global_node.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include <Eigen/Dense>

namespace svs {
namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch_id) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (epoch_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double orthogonality_error_of(const std::vector<double>& t, std::size_t dim) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      t.data(), static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  const Eigen::MatrixXd gram = m.transpose() * m;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

void secure_zero(std::vector<double>& v) noexcept {
  volatile double* p = v.data();
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = 0.0;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

}  // namespace

void ReIdConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (!(similarity_threshold >= -1.0 && similarity_threshold <= 1.0)) {
    throw ConfigError("similarity_threshold outside [-1, 1]");
  }
  if (epoch_length_ms <= 0) throw ConfigError("epoch_length_ms must be positive");
  if (!(behavior_threshold >= 0.0 && behavior_threshold <= 100.0)) {
    throw ConfigError("behavior_threshold outside [0, 100]");
  }
}

BehaviorThreshold::BehaviorThreshold(double v) : value(v) {
  if (!(v >= 0.0 && v <= 100.0)) throw ValidationError("behavior threshold outside [0, 100]");
}

std::vector<double> random_orthogonal(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix on R's diagonal makes the distribution Haar.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  std::vector<double> out(dim * dim);
  for (Eigen::Index row = 0; row < n; ++row) {
    for (Eigen::Index col = 0; col < n; ++col) out[static_cast<std::size_t>(row * n + col)] = q(row, col);
  }
  return out;
}

ReIdState::ReIdState(const ReIdConfig& config, TimestampMs epoch_started)
    : epoch_id_(0),
      epoch_started_(epoch_started),
      dim_(config.feature_dim),
      transform_(random_orthogonal(config.feature_dim, epoch_seed(config.seed, 0))) {
  config.validate();
}

ReIdState::ReIdState(std::uint64_t epoch_id, TimestampMs epoch_started, std::vector<double> transform,
                     std::size_t dim, GlobalId next_global_id)
    : epoch_id_(epoch_id),
      epoch_started_(epoch_started),
      dim_(dim),
      transform_(std::move(transform)),
      next_global_id_(next_global_id) {
  if (dim_ == 0 || transform_.size() != dim_ * dim_) throw ValidationError("transform must be D x D");
  if (next_global_id_ == 0) throw ValidationError("next_global_id must be positive");
  if (orthogonality_error_of(transform_, dim_) >= 1e-6) throw ValidationError("transform is not orthogonal");
}

ReIdState::~ReIdState() { wipe(); }

void ReIdState::wipe() noexcept {
  secure_zero(transform_);
  for (auto& g : gallery_) secure_zero(g.feature.values);
}

double ReIdState::orthogonality_error() const { return orthogonality_error_of(transform_, dim_); }

FeatureVector transform_feature(const FeatureVector& raw, const ReIdState& state) {
  if (raw.dim() != state.dim_) {
    throw ValidationError("feature has dimension " + std::to_string(raw.dim()) + ", state expects " +
                          std::to_string(state.dim_));
  }
  FeatureVector out;
  out.epoch_id = state.epoch_id_;
  out.values.assign(state.dim_, 0.0);
  const double* row = state.transform_.data();
  for (std::size_t r = 0; r < state.dim_; ++r, row += state.dim_) {
    double acc = 0.0;
    for (std::size_t c = 0; c < state.dim_; ++c) acc += row[c] * raw.values[c];
    out.values[r] = acc;
  }
  return out;
}

MatchResult match_global(const FeatureVector& f, ReIdState& state, double similarity_threshold) {
  if (f.epoch_id != state.epoch_id_) {
    throw StaleFeatureError("feature from epoch " + std::to_string(f.epoch_id) + " queried against epoch " +
                            std::to_string(state.epoch_id_));
  }
  if (f.dim() != state.dim_) throw ValidationError("feature dimension does not match the gallery");
  GalleryEntry* best = nullptr;
  double best_sim = -2.0;
  for (auto& entry : state.gallery_) {
    const double sim = cosine_similarity(f, entry.feature);
    if (sim > best_sim || (sim == best_sim && entry.global_id < best->global_id)) {
      best_sim = sim;
      best = &entry;
    }
  }
  if (best != nullptr && best_sim >= similarity_threshold) {
    best->feature = f;
    return {best->global_id, true, best_sim};
  }
  const GlobalId id = state.next_global_id_++;
  state.gallery_.push_back({id, f});
  return {id, false, best == nullptr ? 0.0 : best_sim};
}

RotationOutcome rotate_epoch(ReIdState& state, TimestampMs now, const ReIdConfig& config) {
  if (now - state.epoch_started_ < config.epoch_length_ms) return RotationOutcome::NotDue;
  state.wipe();
  state.gallery_.clear();
  state.epoch_id_ += 1;
  state.epoch_started_ = now;
  state.transform_ = random_orthogonal(state.dim_, epoch_seed(config.seed, state.epoch_id_));
  return RotationOutcome::Rotated;
}

void seed_gallery_for_test(ReIdState& state, std::vector<GalleryEntry> entries, GlobalId next_global_id) {
  state.gallery_ = std::move(entries);
  state.next_global_id_ = next_global_id;
}

bool flag_behavioral(double score, BehaviorThreshold threshold) {
  if (!(score >= 0.0 && score <= 100.0)) throw ValidationError("anomaly score outside [0, 100]");
  return score >= threshold.value;
}

RecordStore::RecordStore(const std::string& path)
    : file_(std::make_unique<std::ofstream>(path, std::ios::out | std::ios::trunc | std::ios::binary)) {
  if (!*file_) throw Error("cannot open record store '" + path + "'");
}

void RecordStore::append(const GlobalRecord& record) { append_line(serialize_record(record)); }

void RecordStore::append_document(const Json& doc) { append(record_from_json(doc)); }

void RecordStore::append_line(std::string line) {
  std::unique_lock lock(mutex_);
  if (file_) {
    *file_ << line << '\n';
    file_->flush();
  }
  lines_.push_back(std::move(line));
}

std::vector<GlobalRecord> RecordStore::records() const {
  std::shared_lock lock(mutex_);
  std::vector<GlobalRecord> out;
  out.reserve(lines_.size());
  for (const auto& l : lines_) out.push_back(parse_record(l));
  return out;
}

std::vector<std::string> RecordStore::lines() const {
  std::shared_lock lock(mutex_);
  return lines_;
}

std::string RecordStore::bytes() const {
  std::shared_lock lock(mutex_);
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(mutex_);
  return lines_.size();
}

void persist_record(const GlobalRecord& record, RecordStore& store) { store.append(record); }

GlobalNode::GlobalNode(ReIdConfig config, std::vector<std::string> cameras, RecordStore& store,
                       TimestampMs start_time)
    : config_(config), cameras_(cameras.begin(), cameras.end()), store_(store), state_(config_, start_time) {}

BatchResult GlobalNode::process_batch(const LocalBatch& batch) {
  if (!cameras_.contains(batch.camera_id)) {
    throw ValidationError("batch from unregistered camera '" + batch.camera_id + "'");
  }
  BatchResult result;
  result.rotated = rotate_epoch(state_, batch.window.end, config_) == RotationOutcome::Rotated;

  for (const auto& entry : batch.entries) {
    try {
      GlobalId id = 0;
      if (entry.feature) {
        id = match_global(transform_feature(*entry.feature, state_), state_, config_.similarity_threshold).global_id;
      } else {
        // No appearance to match on: a fresh identity that is never galleried.
        id = state_.next_global_id_++;
      }
      GlobalRecord record;
      record.global_id = id;
      record.record_time = entry.record_time;
      record.camera_id = batch.camera_id;
      record.bbox_tlwh = entry.bbox_tlwh;
      if (const auto* frame = batch.frame_at(entry.record_time)) {
        record.anomaly_score = frame->anomaly_score;
        record.actions = frame->actions;
        record.objects = frame->objects;
      }
      persist_record(record, store_);
      result.records.push_back(std::move(record));
    } catch (const Error& e) {
      throw Error("batch " + batch.camera_id + "@" + std::to_string(batch.window.start) + ", local id " +
                  std::to_string(entry.local_id) + ": " + e.what());
    }
  }

  const BehaviorThreshold theta(config_.behavior_threshold);
  const FrameSummary* peak = nullptr;
  std::vector<std::string> categories;
  for (const auto& f : batch.frames) {
    if (!flag_behavioral(f.anomaly_score, theta)) continue;
    if (peak == nullptr || f.anomaly_score > peak->anomaly_score) peak = &f;
    for (const auto& a : f.actions) {
      if (std::find(categories.begin(), categories.end(), a) == categories.end()) categories.push_back(a);
    }
  }
  if (peak != nullptr) {
    AnomalyEvent ev;
    ev.kind = AnomalyKind::Behavioral;
    ev.category = categories.empty() ? "unspecified" : join(categories, ", ");
    ev.camera_id = batch.camera_id;
    ev.record_time = peak->record_time;
    ev.value = peak->anomaly_score;
    ev.message = "Behavioral anomaly (" + ev.category + ") on " + batch.camera_id + ", score " +
                 std::to_string(static_cast<int>(std::lround(peak->anomaly_score)));
    result.events.push_back(std::move(ev));
  }
  return result;
}

}  // namespace svs
