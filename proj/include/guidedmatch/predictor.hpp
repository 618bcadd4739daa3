#pragma once

#include <cmath>
#include <vector>

#include "guidedmatch/features.hpp"
#include "guidedmatch/geometry.hpp"
#include "guidedmatch/imu_state.hpp"

namespace guidedmatch {

enum class PredictionStatus { ok, invalid_depth, behind_camera, out_of_frame };

struct Prediction {
  int feature_id = 0;
  double u = 0.0;
  double v = 0.0;
  PredictionStatus status = PredictionStatus::ok;

  /// ok and out_of_frame predictions both carry a usable position.
  bool usable() const {
    return status == PredictionStatus::ok || status == PredictionStatus::out_of_frame;
  }
};

/// How the relative pose's translation moves a point between frames.
enum class PoseModel {
  /// translation is the camera displacement: P = R * (P1 - t).
  camera_motion,
  /// translation is added to the rotated point verbatim: P = R * P1 + t.
  literal,
};

struct FrameBounds {
  int width = 640;
  int height = 480;
};

/// Predicts where a feature of the earlier frame lands in the later one:
/// back-project, rotate by the Euler-difference rotation, shift, re-project.
/// Failures are reported via status, never thrown.
inline Prediction predict_feature(const FeaturePoint& p, const RelativePose& pose,
                                  const CameraIntrinsics& k, FrameBounds bounds = {},
                                  PoseModel model = PoseModel::camera_motion) {
  Prediction out{p.id, p.u, p.v, PredictionStatus::invalid_depth};
  if (!(p.d > 0.0) || !std::isfinite(p.d)) return out;

  const Vec3 p1 = backproject({p.u, p.v, p.d}, k);
  const RotationMatrix rot = euler_to_rotation(pose.rotation);
  const Vec3 moved = model == PoseModel::camera_motion ? rot * (p1 - pose.translation)
                                                       : rot * p1 + pose.translation;
  if (!(moved.z > 0.0)) {
    out.status = PredictionStatus::behind_camera;
    return out;
  }
  const PixelPoint px = project(moved, k);
  out.u = px.u;
  out.v = px.v;
  const bool inside = px.u >= 0.0 && px.v >= 0.0 && px.u < bounds.width && px.v < bounds.height;
  out.status = inside ? PredictionStatus::ok : PredictionStatus::out_of_frame;
  return out;
}

/// Same as predict_frame, but the pose comes from pose_between(t1, t2),
/// which is invoked exactly once.
template <typename PoseFn>
std::vector<Prediction> predict_frame_with(const Frame& current, PoseFn&& pose_between,
                                           double next_timestamp, const CameraIntrinsics& k,
                                           PoseModel model = PoseModel::camera_motion) {
  if (current.timestamp > next_timestamp) {
    throw InvalidArgument("predict_frame: next_timestamp precedes the current frame");
  }
  const RelativePose pose = pose_between(current.timestamp, next_timestamp);
  const FrameBounds bounds{current.width, current.height};
  std::vector<Prediction> out;
  out.reserve(current.features.size());
  for (const auto& f : current.features) out.push_back(predict_feature(f, pose, k, bounds, model));
  return out;
}

/// One prediction per feature of `current`, in the same order.
inline std::vector<Prediction> predict_frame(const Frame& current, const StateLog& log,
                                             double next_timestamp, const CameraIntrinsics& k,
                                             PoseModel model = PoseModel::camera_motion,
                                             double max_gap = kDefaultMaxGap) {
  return predict_frame_with(
      current, [&](double t1, double t2) { return relative_pose(log, t1, t2, max_gap); },
      next_timestamp, k, model);
}

}  // namespace guidedmatch
