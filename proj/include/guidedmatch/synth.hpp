#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "guidedmatch/errors.hpp"
#include "guidedmatch/features.hpp"
#include "guidedmatch/geometry.hpp"
#include "guidedmatch/imu_state.hpp"
#include "guidedmatch/matcher.hpp"

namespace guidedmatch {

// Camera axes: x right, y down, z forward (optical axis). The IMU body
// frame coincides with the camera frame.

/// Constant body angular rate (rad/s) and world linear acceleration (m/s^2).
struct MotionSegment {
  double duration = 0.0;
  Vec3 omega;
  Vec3 accel;
};

enum class TrajectoryKind { still, forward, backward, yaw_left, yaw_right, piecewise };

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::still;
  double amount = 0.0;  // metres for forward/backward, degrees for yaw
  std::vector<MotionSegment> segments;  // piecewise only

  static Trajectory still() { return {}; }
  static Trajectory forward(double metres) { return {TrajectoryKind::forward, metres, {}}; }
  static Trajectory backward(double metres) { return {TrajectoryKind::backward, metres, {}}; }
  static Trajectory yaw_left(double degrees) { return {TrajectoryKind::yaw_left, degrees, {}}; }
  static Trajectory yaw_right(double degrees) { return {TrajectoryKind::yaw_right, degrees, {}}; }
  static Trajectory piecewise(std::vector<MotionSegment> s) {
    return {TrajectoryKind::piecewise, 0.0, std::move(s)};
  }

  /// Concrete segments over [0, duration]. Translations accelerate for the
  /// first half and brake for the second (start and end at rest); yaws turn
  /// at a constant rate about the z axis (positive psi = left).
  std::vector<MotionSegment> segments_for(double duration) const {
    const double half = duration / 2.0;
    switch (kind) {
      case TrajectoryKind::still:
        return {{duration, {}, {}}};
      case TrajectoryKind::forward:
      case TrajectoryKind::backward: {
        const double sign = kind == TrajectoryKind::forward ? 1.0 : -1.0;
        const double a = sign * amount / (half * half);
        return {{half, {}, {0, 0, a}}, {duration - half, {}, {0, 0, -a}}};
      }
      case TrajectoryKind::yaw_left:
      case TrajectoryKind::yaw_right: {
        const double sign = kind == TrajectoryKind::yaw_left ? 1.0 : -1.0;
        const double rate = sign * amount * std::numbers::pi / 180.0 / duration;
        return {{duration, {0, 0, rate}, {}}};
      }
      case TrajectoryKind::piecewise:
        return segments;
    }
    return {};
  }
};

struct Box {
  Vec3 min{-5.0, -4.0, 2.0};
  Vec3 max{5.0, 4.0, 8.0};
};

struct SceneConfig {
  int num_points = 300;
  Box volume;
  /// Keep only points visible from the first camera pose (uniform pixel spread).
  bool visible_in_first_frame = true;
  Trajectory trajectory;
  double duration = 2.0;
  double imu_rate = 100.0;
  double frame_rate = 10.0;
  double gyro_noise_sigma = 0.0;   // rad/s
  double accel_noise_sigma = 0.0;  // m/s^2
  DescriptorKind descriptor_kind = DescriptorKind::binary;
  int descriptor_length = 32;  // bytes for binary, components for real
  /// Bits flipped per observation (binary) or per-component sigma (real).
  double descriptor_noise = 0.0;
  /// Fraction of points whose descriptor duplicates another point's.
  double distractor_fraction = 0.0;
  Vec3 initial_velocity;  // world frame
  CameraIntrinsics intrinsics;
  int width = 640;
  int height = 480;
  std::uint64_t seed = 1;

  void validate() const {
    intrinsics.validate();
    if (num_points <= 0) throw InvalidConfig("num_points must be > 0");
    if (!(duration > 0.0)) throw InvalidConfig("duration must be > 0");
    if (!(imu_rate > 0.0) || !(frame_rate > 0.0)) throw InvalidConfig("rates must be > 0");
    if (width <= 0 || height <= 0) throw InvalidConfig("frame size must be positive");
    if (descriptor_length <= 0) throw InvalidConfig("descriptor_length must be > 0");
    if (gyro_noise_sigma < 0.0 || accel_noise_sigma < 0.0 || descriptor_noise < 0.0) {
      throw InvalidConfig("noise levels must be >= 0");
    }
    if (descriptor_kind == DescriptorKind::binary && descriptor_noise > descriptor_length * 8) {
      throw InvalidConfig("cannot flip more bits than the descriptor has");
    }
    if (distractor_fraction < 0.0 || distractor_fraction > 1.0) {
      throw InvalidConfig("distractor_fraction must lie in [0, 1]");
    }
    if (volume.min.x >= volume.max.x || volume.min.y >= volume.max.y || volume.min.z >= volume.max.z) {
      throw InvalidConfig("point volume is empty");
    }
    if (visible_in_first_frame && !(volume.max.z > 0.0)) {
      throw InvalidConfig("point volume lies behind the first camera");
    }
    for (const auto& s : trajectory.segments_for(duration)) {
      if (!(s.duration >= 0.0) || !s.omega.finite() || !s.accel.finite()) {
        throw InvalidConfig("invalid trajectory segment");
      }
    }
  }
};

/// Exact camera pose at one frame. orientation maps camera to world
/// coordinates; angles is the integral of the body angular rate
/// (psi, theta, phi), i.e. what an ideal gyro integrator reports.
struct CameraPose {
  double t = 0.0;
  RotationMatrix orientation;
  Vec3 position;
  EulerAngles angles;
};

struct GroundTruth {
  CameraIntrinsics intrinsics;
  int width = 640;
  int height = 480;
  std::vector<Vec3> points;       // world points; index = feature id
  std::vector<CameraPose> poses;  // one per frame

  /// Projection of a world point into frame `frame`, if visible.
  std::optional<PixelPoint> observe(std::size_t frame, int point_id) const {
    if (frame >= poses.size()) throw LookupError("unknown frame index " + std::to_string(frame));
    if (point_id < 0 || static_cast<std::size_t>(point_id) >= points.size()) {
      throw LookupError("unknown point id " + std::to_string(point_id));
    }
    const CameraPose& pose = poses[frame];
    const Vec3 cam = pose.orientation.transposed() * (points[point_id] - pose.position);
    if (!(cam.z > 0.0)) return std::nullopt;
    const PixelPoint px = project(cam, intrinsics);
    if (!(px.u >= 0.0 && px.v >= 0.0 && px.u < width && px.v < height)) return std::nullopt;
    return px;
  }

  /// True correspondence of a source feature in the target frame.
  std::optional<int> correspondence(std::size_t source, std::size_t target, int source_id) const {
    if (!observe(source, source_id)) {
      throw LookupError("feature " + std::to_string(source_id) + " is not in the source frame");
    }
    if (observe(target, source_id)) return source_id;
    return std::nullopt;
  }

  /// Exact pose change between two frames, in the integrator's relative form:
  /// Euler difference of the integrated angles and displacement r2 - r1.
  RelativePose relative_pose(std::size_t source, std::size_t target) const {
    if (source >= poses.size() || target >= poses.size()) throw LookupError("unknown frame index");
    return {poses[target].angles - poses[source].angles, poses[target].position - poses[source].position};
  }
};

struct Scene {
  std::vector<Frame> frames;
  std::vector<ImuSample> imu;
  GroundTruth truth;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(tag)));
}

/// Active rotation exp([w]x) for a rotation vector w.
inline RotationMatrix rotation_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return RotationMatrix::identity();
  const Vec3 k = w * (1.0 / angle);
  const double s = std::sin(angle), c = 1.0 - std::cos(angle);
  RotationMatrix r;
  r.m[0] = {1 - c * (k.y * k.y + k.z * k.z), -s * k.z + c * k.x * k.y, s * k.y + c * k.x * k.z};
  r.m[1] = {s * k.z + c * k.x * k.y, 1 - c * (k.x * k.x + k.z * k.z), -s * k.x + c * k.y * k.z};
  r.m[2] = {-s * k.y + c * k.x * k.z, s * k.x + c * k.y * k.z, 1 - c * (k.x * k.x + k.y * k.y)};
  return r;
}

inline EulerAngles rate_to_angles(const Vec3& omega, double dt) {
  return {omega.z * dt, omega.y * dt, omega.x * dt};
}

/// Analytic trajectory: piecewise constant body rates and world accelerations.
class TrajectoryModel {
 public:
  TrajectoryModel(std::vector<MotionSegment> segments, Vec3 v0) : segments_(std::move(segments)) {
    Knot k;
    k.vel = v0;
    for (const auto& s : segments_) {
      knots_.push_back(k);
      k = advance(k, s, s.duration);
      k.t = knots_.back().t + s.duration;
    }
    end_ = k;
  }

  CameraPose pose_at(double t) const {
    const auto [knot, seg] = locate(t);
    const Knot k = seg ? advance(knot, *seg, t - knot.t) : advance(knot, MotionSegment{}, t - knot.t);
    return {t, k.orientation, k.position, k.angles};
  }

  /// Mean body rate and mean world acceleration over (t0, t1].
  std::pair<Vec3, Vec3> mean_rates(double t0, double t1) const {
    Vec3 omega, accel;
    const double dt = t1 - t0;
    double seg_start = 0.0;
    for (const auto& s : segments_) {
      const double lo = std::max(t0, seg_start), hi = std::min(t1, seg_start + s.duration);
      if (lo <= t0 && hi >= t1) {
        omega = s.omega;
        accel = s.accel;
        break;
      }
      if (hi > lo) {
        omega += s.omega * ((hi - lo) / dt);
        accel += s.accel * ((hi - lo) / dt);
      }
      seg_start += s.duration;
    }
    return {omega, accel};
  }

 private:
  struct Knot {
    double t = 0.0;
    RotationMatrix orientation;
    Vec3 position;
    Vec3 vel;
    EulerAngles angles;
  };

  static Knot advance(const Knot& k, const MotionSegment& s, double tau) {
    Knot out = k;
    out.t = k.t + tau;
    out.orientation = k.orientation * rotation_exp(s.omega * tau);
    out.position = k.position + k.vel * tau + s.accel * (0.5 * tau * tau);
    out.vel = k.vel + s.accel * tau;
    out.angles = k.angles + rate_to_angles(s.omega, tau);
    return out;
  }

  std::pair<Knot, const MotionSegment*> locate(double t) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (t <= knots_[i].t + segments_[i].duration) return {knots_[i], &segments_[i]};
    }
    return {end_, nullptr};
  }

  std::vector<MotionSegment> segments_;
  std::vector<Knot> knots_;
  Knot end_;
};

inline Descriptor random_descriptor(const SceneConfig& cfg, std::mt19937_64& rng) {
  if (cfg.descriptor_kind == DescriptorKind::binary) {
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(cfg.descriptor_length));
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(byte(rng));
    return Descriptor::binary(std::move(bytes));
  }
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(cfg.descriptor_length));
  double n2 = 0.0;
  for (auto& x : v) {
    x = g(rng);
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  for (auto& x : v) x /= n;
  return Descriptor::real(std::move(v));
}

inline Descriptor observe_descriptor(const Descriptor& base, const SceneConfig& cfg,
                                     std::mt19937_64& rng) {
  if (cfg.descriptor_noise <= 0.0) return base;
  if (base.kind() == DescriptorKind::binary) {
    auto bytes = base.bytes();
    const int bits = static_cast<int>(bytes.size() * 8);
    const int flips = static_cast<int>(std::lround(cfg.descriptor_noise));
    std::vector<int> order(static_cast<std::size_t>(bits));
    for (int i = 0; i < bits; ++i) order[i] = i;
    for (int i = 0; i < flips; ++i) {
      std::uniform_int_distribution<int> pick(i, bits - 1);
      std::swap(order[i], order[pick(rng)]);
      bytes[order[i] / 8] ^= static_cast<std::uint8_t>(1u << (order[i] % 8));
    }
    return Descriptor::binary(std::move(bytes));
  }
  auto values = base.values();
  std::normal_distribution<double> g(0.0, cfg.descriptor_noise);
  for (auto& x : values) x += g(rng);
  return Descriptor::real(std::move(values));
}

}  // namespace detail

/// Builds frames, an IMU stream and exact ground truth from cfg.
/// Deterministic in cfg (including seed).
inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  GroundTruth& truth = scene.truth;
  truth.intrinsics = cfg.intrinsics;
  truth.width = cfg.width;
  truth.height = cfg.height;

  const detail::TrajectoryModel model(cfg.trajectory.segments_for(cfg.duration), cfg.initial_velocity);

  // World points.
  auto point_rng = detail::substream(cfg.seed, 1);
  std::uniform_real_distribution<double> ux(cfg.volume.min.x, cfg.volume.max.x);
  std::uniform_real_distribution<double> uy(cfg.volume.min.y, cfg.volume.max.y);
  std::uniform_real_distribution<double> uz(cfg.volume.min.z, cfg.volume.max.z);
  truth.poses.push_back(model.pose_at(0.0));
  const std::size_t max_attempts = static_cast<std::size_t>(cfg.num_points) * 10000;
  for (std::size_t attempt = 0; truth.points.size() < static_cast<std::size_t>(cfg.num_points); ++attempt) {
    if (attempt >= max_attempts) {
      throw InvalidConfig("point volume barely intersects the first camera's view");
    }
    const Vec3 p{ux(point_rng), uy(point_rng), uz(point_rng)};
    truth.points.push_back(p);
    if (cfg.visible_in_first_frame && !truth.observe(0, static_cast<int>(truth.points.size() - 1))) {
      truth.points.pop_back();
    }
  }

  // Persistent descriptors, optionally with duplicated (distractor) entries.
  auto desc_rng = detail::substream(cfg.seed, 2);
  std::vector<Descriptor> base;
  base.reserve(truth.points.size());
  for (std::size_t i = 0; i < truth.points.size(); ++i) base.push_back(detail::random_descriptor(cfg, desc_rng));
  if (cfg.distractor_fraction > 0.0 && base.size() > 1) {
    const std::vector<Descriptor> original = base;
    std::bernoulli_distribution pick(cfg.distractor_fraction);
    std::uniform_int_distribution<std::size_t> other(0, base.size() - 2);
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (!pick(desc_rng)) continue;
      std::size_t j = other(desc_rng);
      if (j >= i) ++j;
      base[i] = original[j];
    }
  }

  // Frames.
  const auto frame_count = static_cast<std::size_t>(std::floor(cfg.duration * cfg.frame_rate + 1e-9)) + 1;
  truth.poses.clear();
  auto obs_rng = detail::substream(cfg.seed, 3);
  for (std::size_t j = 0; j < frame_count; ++j) {
    const double t = static_cast<double>(j) / cfg.frame_rate;
    truth.poses.push_back(model.pose_at(t));
    Frame frame;
    frame.timestamp = t;
    frame.width = cfg.width;
    frame.height = cfg.height;
    for (std::size_t i = 0; i < truth.points.size(); ++i) {
      const auto px = truth.observe(j, static_cast<int>(i));
      if (!px) continue;
      frame.features.push_back({static_cast<int>(i), px->u, px->v, px->d,
                                detail::observe_descriptor(base[i], cfg, obs_rng)});
    }
    scene.frames.push_back(std::move(frame));
  }

  // IMU stream at k / imu_rate, k = 1..N; each sample carries the mean
  // rates over the preceding interval, in the body frame.
  auto imu_rng = detail::substream(cfg.seed, 4);
  const auto imu_count = static_cast<std::size_t>(std::floor(cfg.duration * cfg.imu_rate + 1e-9));
  double prev_t = 0.0;
  for (std::size_t k = 1; k <= imu_count; ++k) {
    const double t = static_cast<double>(k) / cfg.imu_rate;
    auto [omega, accel_world] = model.mean_rates(prev_t, t);
    const RotationMatrix orient = model.pose_at(prev_t).orientation;
    Vec3 accel = orient.transposed() * accel_world;
    if (cfg.gyro_noise_sigma > 0.0) {
      std::normal_distribution<double> g(0.0, cfg.gyro_noise_sigma);
      omega = omega + Vec3{g(imu_rng), g(imu_rng), g(imu_rng)};
    }
    if (cfg.accel_noise_sigma > 0.0) {
      std::normal_distribution<double> g(0.0, cfg.accel_noise_sigma);
      accel = accel + Vec3{g(imu_rng), g(imu_rng), g(imu_rng)};
    }
    scene.imu.push_back({t, omega, accel});
    prev_t = t;
  }
  return scene;
}

/// Integrator config matching a scene's initial conditions.
inline IntegratorConfig integrator_config_for(const SceneConfig& cfg) {
  IntegratorConfig ic;
  ic.initial_vel = cfg.initial_velocity;
  return ic;
}

/// Exact position of a source feature's world point in the target frame,
/// or nullopt if it is not visible there. Throws LookupError if the
/// feature is not visible in the source frame.
inline std::optional<std::pair<double, double>> true_reprojection(const GroundTruth& truth,
                                                                   std::size_t source,
                                                                   std::size_t target, int feature_id) {
  if (!truth.observe(source, feature_id)) {
    throw LookupError("feature " + std::to_string(feature_id) + " is not in the source frame");
  }
  const auto px = truth.observe(target, feature_id);
  if (!px) return std::nullopt;
  return std::make_pair(px->u, px->v);
}

struct MatchScore {
  std::size_t total = 0;
  std::size_t false_matches = 0;
};

/// A pair is false when its target differs from the true correspondence
/// (including when the source point has no correspondence).
inline MatchScore score_matches(const MatchReport& report, const GroundTruth& truth,
                                std::size_t source, std::size_t target) {
  MatchScore s;
  s.total = report.pairs.size();
  for (const auto& p : report.pairs) {
    const auto want = truth.correspondence(source, target, p.source_id);
    if (!want || *want != p.target_id) ++s.false_matches;
  }
  return s;
}

}  // namespace guidedmatch
