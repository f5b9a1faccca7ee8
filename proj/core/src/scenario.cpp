#include "svs/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

#include "svs/trace.hpp"

namespace svs {
namespace {

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

// Keypoint layout as fractions of the box (COCO order).
constexpr std::array<std::pair<double, double>, kPoseKeypoints> kSkeleton = {{
    {0.50, 0.06}, {0.46, 0.04}, {0.54, 0.04}, {0.42, 0.06}, {0.58, 0.06}, {0.32, 0.20},
    {0.68, 0.20}, {0.24, 0.36}, {0.76, 0.36}, {0.20, 0.50}, {0.80, 0.50}, {0.38, 0.52},
    {0.62, 0.52}, {0.38, 0.74}, {0.62, 0.74}, {0.38, 0.96}, {0.62, 0.96},
}};

struct Walker {
  std::size_t identity = 0;
  double x = 0.0;  // foot point
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  std::size_t leaves_at = 0;  // frame index
  std::string action;
  std::string object;
};

class Generator {
 public:
  Generator(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  std::size_t new_identity() {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(cfg_.feature_dim);
    double n2 = 0.0;
    for (auto& x : v) {
      x = g(rng_);
      n2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x *= inv;
    identities_.push_back(std::move(v));
    return identities_.size() - 1;
  }

  Walker spawn(std::size_t frame) {
    const auto& wm = cfg_.walkers;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Walker w;
    if (!departed_.empty() && u(rng_) < wm.reappear_probability) {
      const auto pick = static_cast<std::size_t>(u(rng_) * static_cast<double>(departed_.size()));
      const auto it = departed_.begin() + static_cast<std::ptrdiff_t>(std::min(pick, departed_.size() - 1));
      w.identity = *it;
      departed_.erase(it);
    } else {
      w.identity = new_identity();
    }
    const double y_min = min_y();
    w.y = y_min + u(rng_) * (wm.image_height - 1.0 - y_min);
    const double half = box_w(w.y) / 2.0;
    w.x = half + u(rng_) * (wm.image_width - 2.0 * half);
    const bool standing = u(rng_) < 0.15;
    w.action = standing ? "standing" : "walking";
    if (!standing) {
      const double heading = u(rng_) * 2.0 * std::numbers::pi;
      const double speed = wm.speed * (0.5 + u(rng_));
      w.vx = speed * std::cos(heading);
      w.vy = speed * std::sin(heading) * 0.5;
    }
    const double r = u(rng_);
    w.object = r < 0.2 ? "backpack" : (r < 0.3 ? "handbag" : "");
    std::exponential_distribution<double> life(1.0 / wm.mean_lifetime_s);
    const auto frames = static_cast<std::size_t>(std::ceil(life(rng_) * cfg_.fps));
    w.leaves_at = frame + std::max<std::size_t>(frames, 1);
    return w;
  }

  void depart(const Walker& w) { departed_.push_back(w.identity); }

  void step(Walker& w) const {
    const auto& wm = cfg_.walkers;
    w.x += w.vx / cfg_.fps;
    w.y += w.vy / cfg_.fps;
    const double y_lo = min_y();
    const double y_hi = wm.image_height - 1.0;
    if (w.y < y_lo) {
      w.y = 2 * y_lo - w.y;
      w.vy = -w.vy;
    } else if (w.y > y_hi) {
      w.y = 2 * y_hi - w.y;
      w.vy = -w.vy;
    }
    w.y = std::clamp(w.y, y_lo, y_hi);
    const double half = box_w(w.y) / 2.0;
    const double x_lo = half;
    const double x_hi = wm.image_width - half;
    if (w.x < x_lo) {
      w.x = 2 * x_lo - w.x;
      w.vx = -w.vx;
    } else if (w.x > x_hi) {
      w.x = 2 * x_hi - w.x;
      w.vx = -w.vx;
    }
    w.x = std::clamp(w.x, x_lo, x_hi);
  }

  Detection detect(const Walker& w) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    Detection d;
    d.cls = "person";
    d.conf = round_to(0.55 + 0.43 * u(rng_), 100.0);
    const double h = box_h(w.y);
    const double bw = box_w(w.y);
    d.bbox = BBoxTlwh{round_to(w.x - bw / 2.0, 100.0), round_to(w.y - h, 100.0), round_to(bw, 100.0),
                      round_to(h, 100.0)};
    Pose pose;
    for (std::size_t k = 0; k < kPoseKeypoints; ++k) {
      pose.keypoints[k] = Keypoint{round_to(d.bbox.x + kSkeleton[k].first * bw + 2.0 * g(rng_), 100.0),
                                   round_to(d.bbox.y + kSkeleton[k].second * h + 2.0 * g(rng_), 100.0),
                                   round_to(0.4 + 0.6 * u(rng_), 100.0)};
    }
    d.pose = pose;
    const auto& base = identities_[w.identity];
    const double sigma = cfg_.walkers.feature_noise / std::sqrt(static_cast<double>(cfg_.feature_dim));
    std::vector<double> v(base.size());
    double n2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = base[i] + sigma * g(rng_);
      n2 += v[i] * v[i];
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x = round_to(x * inv, 1e4);
    d.feature = FeatureVector{std::move(v), 0};
    return d;
  }

  double base_score() {
    std::uniform_real_distribution<double> u(0.0, cfg_.walkers.base_score_max);
    return round_to(u(rng_), 100.0);
  }

 private:
  double box_h(double foot_y) const { return 60.0 + 0.25 * foot_y; }
  double box_w(double foot_y) const { return 0.4 * box_h(foot_y); }
  double min_y() const { return box_h(0.0) / 0.75 + 1.0; }  // keeps the box top inside the image

  const ScenarioConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::vector<double>> identities_;
  std::vector<std::size_t> departed_;
};

// Walker slots of one camera: `base` always occupied, one fractional slot
// occupied for a fixed share of every duty period, plus statistical bursts.
struct CameraState {
  std::vector<std::optional<Walker>> slots;
  std::vector<std::optional<Walker>> burst;
};

std::size_t frame_of(double t_s, double fps) { return static_cast<std::size_t>(std::llround(t_s * fps)); }

}  // namespace

void ScenarioConfig::validate() const {
  if (!(fps > 0.0) || fps > 1000.0) throw ConfigError("fps must be in (0, 1000]");
  if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
  if (!(target_density >= 0.0) || !std::isfinite(target_density)) throw ConfigError("target_density must be >= 0");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (cameras.empty()) throw ConfigError("scenario has no cameras");
  const auto& w = walkers;
  if (!(w.speed >= 0.0) || !(w.mean_lifetime_s > 0.0) || !(w.feature_noise >= 0.0) || !(w.duty_period_s > 0.0)) {
    throw ConfigError("walker parameters out of range");
  }
  if (!(w.image_width >= 200.0) || !(w.image_height >= 400.0)) throw ConfigError("image too small for walkers");
  if (!(w.reappear_probability >= 0.0 && w.reappear_probability <= 1.0)) {
    throw ConfigError("reappear_probability must be in [0, 1]");
  }
  if (!(w.base_score_max >= 0.0 && w.base_score_max <= 100.0)) throw ConfigError("base_score_max must be in [0, 100]");
  if (std::ceil(people_per_frame()) > static_cast<double>(w.max_people)) {
    throw ConfigError("infeasible density: " + std::to_string(target_density) + " detections/s needs " +
                      std::to_string(people_per_frame()) + " people per frame at " + std::to_string(fps) +
                      " fps, above max_people " + std::to_string(w.max_people));
  }
  for (const auto& c : cameras) c.validate();
  for (const auto& inj : anomaly_injections) {
    if (!(inj.time_s >= 0.0 && inj.time_s < duration_s)) throw ConfigError("anomaly injection outside the duration");
    if (!(inj.duration_s > 0.0)) throw ConfigError("anomaly injection duration must be positive");
    if (!(inj.score >= 0.0 && inj.score <= 100.0)) throw ConfigError("anomaly injection score must be in [0, 100]");
    if (inj.kind == AnomalyKind::Behavioral && inj.category.empty()) {
      throw ConfigError("behavioral injection needs a category");
    }
    if (!inj.camera_id.empty() &&
        std::none_of(cameras.begin(), cameras.end(), [&](const auto& c) { return c.camera_id == inj.camera_id; })) {
      throw ConfigError("anomaly injection names unknown camera '" + inj.camera_id + "'");
    }
  }
}

std::size_t ScenarioConfig::frames_per_camera() const {
  return static_cast<std::size_t>(std::llround(duration_s * fps));
}

CameraConfig default_camera(std::string camera_id, std::string location_id) {
  CameraConfig c;
  c.camera_id = std::move(camera_id);
  c.location_id = std::move(location_id);
  c.display_name = c.camera_id;
  c.homography.m = {0.01, 0, 0, 0, 0.01, 0, 0, 0, 1};
  c.bev_extent = BevExtent{0.0, 0.0, 19.2, 10.8};
  c.live = true;
  return c;
}

Json to_json(const ScenarioConfig& cfg) {
  Json cams = Json::array();
  for (const auto& c : cfg.cameras) cams.push_back(to_json(c));
  Json inj = Json::array();
  for (const auto& i : cfg.anomaly_injections) {
    inj.push_back({{"time_s", i.time_s},
                   {"kind", std::string(to_string(i.kind))},
                   {"category", i.category},
                   {"score", i.score},
                   {"duration_s", i.duration_s},
                   {"camera_id", i.camera_id},
                   {"extra_people", i.extra_people}});
  }
  const auto& w = cfg.walkers;
  return Json{{"seed", cfg.seed},
              {"duration_s", cfg.duration_s},
              {"fps", cfg.fps},
              {"target_density", cfg.target_density},
              {"start_ms", cfg.start_ms},
              {"feature_dim", cfg.feature_dim},
              {"cameras", std::move(cams)},
              {"anomaly_injections", std::move(inj)},
              {"walkers",
               {{"speed", w.speed},
                {"mean_lifetime_s", w.mean_lifetime_s},
                {"image_width", w.image_width},
                {"image_height", w.image_height},
                {"feature_noise", w.feature_noise},
                {"reappear_probability", w.reappear_probability},
                {"max_people", w.max_people},
                {"duty_period_s", w.duty_period_s},
                {"base_score_max", w.base_score_max}}}};
}

ScenarioConfig scenario_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario config must be an object");
  ScenarioConfig cfg;
  try {
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.duration_s = doc.value("duration_s", cfg.duration_s);
    cfg.fps = doc.value("fps", cfg.fps);
    cfg.target_density = doc.value("target_density", cfg.target_density);
    cfg.start_ms = doc.value("start_ms", cfg.start_ms);
    cfg.feature_dim = doc.value("feature_dim", cfg.feature_dim);
    if (doc.contains("cameras")) cfg.cameras = parse_camera_configs(doc.at("cameras"));
    for (const auto& j : doc.value("anomaly_injections", Json::array())) {
      AnomalyInjection i;
      i.time_s = j.at("time_s").get<double>();
      i.kind = anomaly_kind_from_string(j.value("kind", std::string("Behavioral")));
      i.category = j.value("category", std::string{});
      i.score = j.value("score", 0.0);
      i.duration_s = j.value("duration_s", i.duration_s);
      i.camera_id = j.value("camera_id", std::string{});
      i.extra_people = j.value("extra_people", i.extra_people);
      cfg.anomaly_injections.push_back(std::move(i));
    }
    if (doc.contains("walkers")) {
      const auto& j = doc.at("walkers");
      auto& w = cfg.walkers;
      w.speed = j.value("speed", w.speed);
      w.mean_lifetime_s = j.value("mean_lifetime_s", w.mean_lifetime_s);
      w.image_width = j.value("image_width", w.image_width);
      w.image_height = j.value("image_height", w.image_height);
      w.feature_noise = j.value("feature_noise", w.feature_noise);
      w.reappear_probability = j.value("reappear_probability", w.reappear_probability);
      w.max_people = j.value("max_people", w.max_people);
      w.duty_period_s = j.value("duty_period_s", w.duty_period_s);
      w.base_score_max = j.value("base_score_max", w.base_score_max);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  if (cfg.cameras.empty()) cfg.cameras.push_back(default_camera());
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config '" + path + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("scenario config '" + path + "' is not valid JSON");
  return scenario_from_json(doc);
}

ScenarioStats generate_scenario(const ScenarioConfig& cfg, std::ostream& trace, std::ostream* labels) {
  cfg.validate();
  Generator gen(cfg);
  const double m = cfg.people_per_frame();
  const auto base = static_cast<std::size_t>(std::floor(m));
  const double frac = m - static_cast<double>(base);
  const std::size_t period = std::max<std::size_t>(1, frame_of(cfg.walkers.duty_period_s, cfg.fps));
  const auto frac_on = static_cast<std::size_t>(std::llround(frac * static_cast<double>(period)));
  const std::size_t frames = cfg.frames_per_camera();

  std::vector<CameraState> states(cfg.cameras.size());
  for (auto& s : states) s.slots.resize(base + (frac_on > 0 ? 1 : 0));

  auto injection_camera = [&](const AnomalyInjection& inj) -> std::size_t {
    if (inj.camera_id.empty()) return 0;
    for (std::size_t c = 0; c < cfg.cameras.size(); ++c) {
      if (cfg.cameras[c].camera_id == inj.camera_id) return c;
    }
    return 0;
  };

  ScenarioStats stats;
  for (std::size_t f = 0; f < frames; ++f) {
    const TimestampMs ts = cfg.start_ms + static_cast<TimestampMs>(std::floor(static_cast<double>(f) * 1000.0 / cfg.fps));
    for (std::size_t c = 0; c < cfg.cameras.size(); ++c) {
      auto& st = states[c];
      const AnomalyInjection* behavioral = nullptr;
      std::size_t burst = 0;
      for (const auto& inj : cfg.anomaly_injections) {
        if (injection_camera(inj) != c) continue;
        const std::size_t b = frame_of(inj.time_s, cfg.fps);
        const std::size_t e = b + std::max<std::size_t>(1, frame_of(inj.duration_s, cfg.fps));
        if (f < b || f >= e) continue;
        if (inj.kind == AnomalyKind::Behavioral) {
          if (behavioral == nullptr || inj.score > behavioral->score) behavioral = &inj;
        } else {
          burst += inj.extra_people;
        }
      }

      auto update = [&](std::optional<Walker>& slot, bool occupied) {
        if (slot && (!occupied || f >= slot->leaves_at)) {
          gen.depart(*slot);
          slot.reset();
        }
        if (occupied && !slot) {
          slot = gen.spawn(f);
        } else if (slot) {
          gen.step(*slot);
        }
      };
      for (std::size_t s = 0; s < st.slots.size(); ++s) {
        const bool occupied = s < base || (f % period) < frac_on;
        update(st.slots[s], occupied);
      }
      if (st.burst.size() < burst) st.burst.resize(burst);
      for (std::size_t s = 0; s < st.burst.size(); ++s) update(st.burst[s], s < burst);

      FrameObservation obs;
      obs.camera_id = cfg.cameras[c].camera_id;
      obs.frame_index = f;
      obs.record_time = ts;
      std::vector<std::string> actions;
      std::vector<std::string> objects;
      auto emit = [&](const std::optional<Walker>& w) {
        if (!w) return;
        obs.detections.push_back(gen.detect(*w));
        actions.push_back(w->action);
        if (!w->object.empty()) objects.push_back(w->object);
      };
      for (const auto& w : st.slots) emit(w);
      for (const auto& w : st.burst) emit(w);
      std::sort(objects.begin(), objects.end());
      objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
      obs.objects = std::move(objects);
      const double normal_score = gen.base_score();
      if (behavioral != nullptr) {
        obs.frame_anomaly_score = behavioral->score;
        obs.actions = {behavioral->category};
        ++stats.anomalous_frames;
      } else {
        std::sort(actions.begin(), actions.end());
        actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
        obs.actions = std::move(actions);
        obs.frame_anomaly_score = normal_score;
      }
      stats.detections += obs.detections.size();
      ++stats.frames;
      trace << serialize_observation(obs) << '\n';
      if (labels != nullptr) *labels << (behavioral != nullptr ? 1 : 0) << '\n';
    }
  }
  stats.detections_per_second =
      static_cast<double>(stats.detections) / (cfg.duration_s * static_cast<double>(cfg.cameras.size()));
  return stats;
}

}  // namespace svs
