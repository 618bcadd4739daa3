#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "guidedmatch/errors.hpp"
#include "guidedmatch/geometry.hpp"

namespace guidedmatch {

/// One gyro + accelerometer reading. omega = (roll rate about x,
/// pitch rate about y, yaw rate about z); t is seconds since start.
struct ImuSample {
  double t = 0.0;
  Vec3 omega;
  Vec3 accel;
};

/// Integrated camera state at time t. disp is relative to the start position.
struct CameraState {
  double t = 0.0;
  EulerAngles theta;
  Vec3 vel;
  Vec3 disp;
};

struct RelativePose {
  EulerAngles rotation;
  Vec3 translation;
};

enum class FrameMode {
  /// Raw accelerometer values are integrated as-is (no rotation into a world frame).
  body_frame,
  /// Acceleration is rotated by the current orientation before integrating.
  world_frame,
};

struct IntegratorConfig {
  EulerAngles initial_theta;
  Vec3 initial_vel;
  Vec3 gravity;  // subtracted from the (possibly rotated) acceleration
  FrameMode frame_mode = FrameMode::body_frame;
  double start_time = 0.0;  // timestamp of the initial state
};

inline constexpr double kDefaultMaxGap = 0.5;

/// Advance one IMU interval assuming constant omega and accel over dt.
///
/// Displacement uses v_L*dt + a*dt^2/2, which is exact for piecewise
/// constant acceleration. (The commonly printed "v_L + a*dt/2" form is not
/// dimensionally a displacement.)
inline CameraState integrate_step(const CameraState& prev, const ImuSample& sample, double dt,
                                  const IntegratorConfig& cfg) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInterval("integrate_step: dt must be > 0");
  if (!sample.omega.finite() || !sample.accel.finite()) {
    throw InvalidArgument("integrate_step: non-finite sample");
  }

  // omega.x -> phi (x), omega.y -> theta (y), omega.z -> psi (z)
  const EulerAngles dtheta{sample.omega.z * dt, sample.omega.y * dt, sample.omega.x * dt};

  Vec3 accel = sample.accel;
  if (cfg.frame_mode == FrameMode::world_frame) {
    accel = euler_to_rotation(prev.theta).transposed() * accel;
  }
  accel = accel - cfg.gravity;

  CameraState next;
  next.t = prev.t + dt;
  next.theta = prev.theta + dtheta;
  next.vel = prev.vel + accel * dt;
  next.disp = prev.disp + prev.vel * dt + accel * (0.5 * dt * dt);
  return next;
}

/// Immutable time-indexed log of camera states; built by build_log.
class StateLog {
 public:
  std::span<const CameraState> states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  const CameraState& front() const { return states_.front(); }
  const CameraState& back() const { return states_.back(); }

 private:
  explicit StateLog(std::vector<CameraState> states) : states_(std::move(states)) {}
  friend StateLog build_log(std::span<const ImuSample>, const IntegratorConfig&);

  std::vector<CameraState> states_;
};

inline StateLog build_log(std::span<const ImuSample> samples, const IntegratorConfig& cfg) {
  if (samples.empty()) throw OrderingError("build_log: no samples", 0);

  std::vector<CameraState> states;
  states.reserve(samples.size() + 1);
  states.push_back({cfg.start_time, cfg.initial_theta, cfg.initial_vel, Vec3{}});

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double prev_t = states.back().t;
    const double t = samples[i].t;
    if (!std::isfinite(t) || !(t > prev_t)) {
      throw OrderingError("build_log: timestamps must be strictly increasing after start_time", i);
    }
    CameraState next = integrate_step(states.back(), samples[i], t - prev_t, cfg);
    next.t = t;  // avoid drift from repeated prev.t + dt
    states.push_back(next);
  }
  return StateLog(std::move(states));
}

/// Nearest logged state; ties go to the earlier entry. Throws OutOfRange
/// when the nearest entry is farther than max_gap.
inline const CameraState& state_at(const StateLog& log, double t, double max_gap = kDefaultMaxGap) {
  const auto states = log.states();
  if (states.empty()) throw OutOfRange("state_at: empty log");
  if (!std::isfinite(t)) throw OutOfRange("state_at: non-finite time");

  const auto it = std::lower_bound(states.begin(), states.end(), t,
                                   [](const CameraState& s, double v) { return s.t < v; });
  const CameraState* best = nullptr;
  if (it == states.end()) {
    best = &states.back();
  } else if (it == states.begin()) {
    best = &*it;
  } else {
    const CameraState& later = *it;
    const CameraState& earlier = *(it - 1);
    best = (t - earlier.t <= later.t - t) ? &earlier : &later;
  }
  if (std::abs(best->t - t) > max_gap) {
    throw OutOfRange("state_at: no logged state within max_gap of t=" + std::to_string(t));
  }
  return *best;
}

/// Pose change between t1 and t2: translation r2 - r1 and the componentwise
/// Euler difference (psi, theta, phi).
inline RelativePose relative_pose(const StateLog& log, double t1, double t2,
                                  double max_gap = kDefaultMaxGap) {
  if (t1 > t2) throw InvalidArgument("relative_pose: t1 must be <= t2");
  const CameraState& s1 = state_at(log, t1, max_gap);
  const CameraState& s2 = state_at(log, t2, max_gap);
  return {s2.theta - s1.theta, s2.disp - s1.disp};
}

}  // namespace guidedmatch
