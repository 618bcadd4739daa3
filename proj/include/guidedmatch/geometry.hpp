#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "guidedmatch/errors.hpp"

namespace guidedmatch {

// All reals are double. Angles in radians.

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

/// Euler angles in (z, y, x) order: psi about z, theta about y, phi about x.
/// No wrapping is applied anywhere; a single per-frame rotation beyond pi
/// is not supported by the Euler-difference model.
struct EulerAngles {
  double psi = 0.0;
  double theta = 0.0;
  double phi = 0.0;

  constexpr EulerAngles operator+(const EulerAngles& o) const {
    return {psi + o.psi, theta + o.theta, phi + o.phi};
  }
  constexpr EulerAngles operator-(const EulerAngles& o) const {
    return {psi - o.psi, theta - o.theta, phi - o.phi};
  }
  constexpr bool operator==(const EulerAngles&) const = default;

  bool finite() const {
    return std::isfinite(psi) && std::isfinite(theta) && std::isfinite(phi);
  }
};

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  bool finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }

  /// Throws InvalidArgument for a (near) zero or non-finite quaternion.
  Quaternion normalized() const {
    const double n = norm();
    if (!finite() || !(n > 1e-12)) {
      throw InvalidArgument("quaternion has zero or non-finite norm");
    }
    return {w / n, x / n, y / n, z / n};
  }
};

/// 3x3 matrix, row-major: m[row][col].
struct RotationMatrix {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static constexpr RotationMatrix identity() { return {}; }

  constexpr double operator()(int r, int c) const { return m[r][c]; }

  constexpr Vec3 operator*(const Vec3& p) const {
    return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
  }

  constexpr RotationMatrix operator*(const RotationMatrix& o) const {
    RotationMatrix out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        out.m[r][c] = m[r][0] * o.m[0][c] + m[r][1] * o.m[1][c] + m[r][2] * o.m[2][c];
      }
    }
    return out;
  }

  constexpr RotationMatrix transposed() const {
    RotationMatrix out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out.m[r][c] = m[c][r];
    }
    return out;
  }

  constexpr double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
};

/// Pinhole intrinsics. s maps metric depth to stored depth units (d = z * s).
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  double s = 5000.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !(s > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
      throw InvalidArgument("camera intrinsics require fx > 0, fy > 0, s > 0");
    }
  }
};

/// Frame coordinate. d == 0 marks missing depth.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;
};

/// Yaw-pitch-roll (ZYX) quaternion. The four components follow the
/// half-angle product form; the result is renormalized.
inline Quaternion euler_to_quaternion(const EulerAngles& e) {
  if (!e.finite()) throw InvalidArgument("euler_to_quaternion: non-finite angle");
  const double cphi = std::cos(e.phi / 2), sphi = std::sin(e.phi / 2);
  const double cth = std::cos(e.theta / 2), sth = std::sin(e.theta / 2);
  const double cpsi = std::cos(e.psi / 2), spsi = std::sin(e.psi / 2);
  const Quaternion q{
      cphi * cth * cpsi + sphi * sth * spsi,
      sphi * cth * cpsi - cphi * sth * spsi,
      cphi * sth * cpsi + sphi * cth * spsi,
      cphi * cth * spsi - sphi * sth * cpsi,
  };
  return q.normalized();
}

/// Rotation matrix from a unit quaternion q = (q0, q1, q2, q3) = (w, x, y, z).
///
/// The entries are the passive (frame-change) form: the matrix is the
/// transpose of the usual active rotation by q. Applied to a point expressed
/// in a frame, it yields the point's coordinates in the frame rotated by q.
inline RotationMatrix quaternion_to_rotation(const Quaternion& in) {
  Quaternion q = in;
  if (!q.finite() || std::abs(q.norm() - 1.0) > 1e-6) q = in.normalized();
  const double q0 = q.w, q1 = q.x, q2 = q.y, q3 = q.z;
  RotationMatrix r;
  r.m[0] = {1 - 2 * q2 * q2 - 2 * q3 * q3, 2 * q1 * q2 + 2 * q0 * q3, 2 * q1 * q3 - 2 * q0 * q2};
  r.m[1] = {2 * q1 * q2 - 2 * q0 * q3, 1 - 2 * q1 * q1 - 2 * q3 * q3, 2 * q2 * q3 + 2 * q0 * q1};
  r.m[2] = {2 * q1 * q3 + 2 * q0 * q2, 2 * q2 * q3 - 2 * q0 * q1, 1 - 2 * q1 * q1 - 2 * q2 * q2};
  return r;
}

/// Passive rotation for a set of Euler angles (frame-change matrix).
inline RotationMatrix euler_to_rotation(const EulerAngles& e) {
  return quaternion_to_rotation(euler_to_quaternion(e));
}

/// Camera point to frame coordinate. Throws BehindCamera for z <= 0.
inline PixelPoint project(const Vec3& p, const CameraIntrinsics& k) {
  if (!p.finite()) throw InvalidArgument("project: non-finite point");
  if (!(p.z > 0.0)) throw BehindCamera("project: point has z <= 0");
  return {p.x * k.fx / p.z + k.cx, p.y * k.fy / p.z + k.cy, p.z * k.s};
}

/// Frame coordinate with depth to camera point. Throws InvalidDepth for d <= 0.
inline Vec3 backproject(const PixelPoint& p, const CameraIntrinsics& k) {
  if (!(p.d > 0.0) || !std::isfinite(p.d)) throw InvalidDepth("backproject: depth must be > 0");
  const double z = p.d / k.s;
  return {(p.u - k.cx) * z / k.fx, (p.v - k.cy) * z / k.fy, z};
}

/// rot * p + trans.
inline Vec3 transform_point(const Vec3& p, const RotationMatrix& rot, const Vec3& trans) {
  if (!p.finite() || !trans.finite()) throw InvalidArgument("transform_point: non-finite input");
  return rot * p + trans;
}

}  // namespace guidedmatch
