#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "capvo/errors.hpp"
#include "capvo/tensor.hpp"

// Rigid-body pose algebra. A Pose maps camera coordinates to world
// coordinates: x_world = q * x_cam + t. Quaternions are kept unit length and
// sign-canonical (w >= 0) everywhere outside raw network outputs.

namespace capvo {

struct Pose {
  Eigen::Vector3d t{0.0, 0.0, 0.0};
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
};

// Flip sign so w > 0; on the w == 0 great circle, make the first nonzero of
// (x, y, z) positive. Idempotent, and maps q/-q to the same representative.
inline Eigen::Quaterniond canonical_sign(Eigen::Quaterniond q) {
  double lead = q.w();
  if (lead == 0.0) lead = q.x();
  if (lead == 0.0) lead = q.y();
  if (lead == 0.0) lead = q.z();
  if (lead < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

inline Pose pose_identity() { return Pose{}; }

// Composition applies `b` first, then `a`: (a*b)(x) = a(b(x)).
inline Pose pose_compose(const Pose& a, const Pose& b) {
  Pose out;
  out.t = a.t + a.q * b.t;
  out.q = canonical_sign((a.q * b.q).normalized());
  return out;
}

inline Pose pose_inverse(const Pose& p) {
  Pose out;
  out.q = canonical_sign(p.q.conjugate().normalized());
  out.t = -(out.q * p.t);
  return out;
}

// Motion of `b` expressed in `a`'s frame: a^-1 * b.
inline Pose pose_relative(const Pose& a, const Pose& b) {
  return pose_compose(pose_inverse(a), b);
}

// Rotation angle of a unit quaternion, in degrees; uses |w| so q and -q
// agree. Range [0, 180].
inline double rotation_angle_deg(const Eigen::Quaterniond& q) {
  double w = std::abs(q.normalized().w());
  if (w > 1.0) w = 1.0;
  return 2.0 * std::acos(w) * (180.0 / 3.14159265358979323846);
}

inline double rotation_geodesic_deg(const Eigen::Quaterniond& a,
                                    const Eigen::Quaterniond& b) {
  return rotation_angle_deg(a.normalized().conjugate() * b.normalized());
}

// Turn a raw 7-vector regressor output [tx,ty,tz,qw,qx,qy,qz] into a valid
// pose. The quaternion part is normalized then sign-canonicalized; a raw norm
// under 1e-8 means the network emitted a degenerate rotation.
template <typename T>
Pose extract_pose(const Tensor<T>& raw) {
  require_shape(raw, {7}, "extract_pose input");
  Pose p;
  p.t = Eigen::Vector3d(static_cast<double>(raw[0]),
                        static_cast<double>(raw[1]),
                        static_cast<double>(raw[2]));
  Eigen::Quaterniond q(static_cast<double>(raw[3]), static_cast<double>(raw[4]),
                       static_cast<double>(raw[5]), static_cast<double>(raw[6]));
  const double n = q.norm();
  if (!(n >= 1e-8))
    throw NumericError("extract_pose: quaternion norm below 1e-8");
  q.coeffs() /= n;
  p.q = canonical_sign(q);
  return p;
}

}  // namespace capvo
