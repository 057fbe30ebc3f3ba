#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "capvo/pose.hpp"
#include "capvo/rng.hpp"
#include "capvo/scene.hpp"

// Ground-truth camera paths inside the tube. Three classes:
//   incremental     gentle forward motion, slow smooth turns
//   scan-with-loops axial back-and-forth sweeps that revisit earlier
//                   positions (local loop closures)
//   sharp           abrupt heading and orientation changes
// Construction walks constant-length steps along a class-specific direction
// field, so the requested path length is met exactly and per-frame limits
// hold by construction. Orientations chase the travel direction through a
// slerp clamped at the angular speed limit.

namespace capvo {

enum class TrajClass { kIncremental, kScanWithLoops, kSharp };

inline std::string traj_class_name(TrajClass c) {
  switch (c) {
    case TrajClass::kIncremental: return "incremental";
    case TrajClass::kScanWithLoops: return "scan-with-loops";
    case TrajClass::kSharp: return "sharp";
  }
  throw ConfigError("unknown trajectory class");
}

inline TrajClass traj_class_from_name(const std::string& s) {
  if (s == "incremental") return TrajClass::kIncremental;
  if (s == "scan-with-loops") return TrajClass::kScanWithLoops;
  if (s == "sharp") return TrajClass::kSharp;
  throw ConfigError("unknown trajectory class: " + s);
}

struct TrajectorySpec {
  TrajClass cls = TrajClass::kIncremental;
  double length = 2.0;            // meters of total path
  std::size_t frames = 200;
  double max_trans_step = 0.05;   // meters per frame
  double max_rot_step = 0.15;     // radians per frame
  std::uint64_t seed = 1;

  void validate() const {
    if (frames < 2) throw ConfigError("trajectory: need at least 2 frames");
    if (length < 0.0 || max_trans_step < 0.0 || max_rot_step < 0.0)
      throw ConfigError("trajectory: negative length or speed");
    if (length / static_cast<double>(frames - 1) > max_trans_step + 1e-12)
      throw ConfigError(
          "trajectory: infeasible, mean step exceeds max translational step");
  }
};

struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
};

inline constexpr double kFrameHz = 30.0;

namespace detail {

// Slerp `prev` toward `target` without exceeding `max_step` radians.
inline Eigen::Quaterniond clamp_rotate(const Eigen::Quaterniond& prev,
                                       const Eigen::Quaterniond& target,
                                       double max_step) {
  const double angle = prev.angularDistance(target);
  if (angle <= max_step || angle < 1e-15) return target.normalized();
  return prev.slerp(max_step / angle, target).normalized();
}

}  // namespace detail

inline Trajectory generate_trajectory(const TrajectorySpec& spec,
                                      const SceneConfig& scene) {
  spec.validate();
  scene.validate();
  const std::size_t n = spec.frames;
  const double step = spec.length / static_cast<double>(n - 1);

  // keep the camera comfortably off the wall
  const double rho_max = 0.55 * scene.tube_radius *
                         (1.0 - scene.radius_wobble) *
                         (1.0 - scene.bump_amplitude);

  Rng rng(seed_mix(spec.seed, 0xC0FFEEull));
  std::vector<Eigen::Vector3d> pos(n);
  pos[0] = Eigen::Vector3d(0.0, 0.0, 0.0);

  // class-specific unit direction field
  // scan class: number of axial sweep cycles, which bounds the revisit count
  const std::size_t cycles = std::max<std::size_t>(2, (n + 99) / 100);
  double sharp_hold = 0.0;
  Eigen::Vector3d sharp_dir(0, 0, 1);
  const std::uint64_t nseed = seed_mix(spec.seed, 7);

  auto direction_at = [&](std::size_t i) -> Eigen::Vector3d {
    const double s = static_cast<double>(i) / static_cast<double>(n - 1);
    switch (spec.cls) {
      case TrajClass::kIncremental: {
        const double lx = noise::fbm3(1.3 * s, 0.0, 3.7, nseed) - 0.5;
        const double ly = noise::fbm3(0.0, 1.3 * s, 9.1, nseed) - 0.5;
        return Eigen::Vector3d(0.35 * lx, 0.35 * ly, 1.0).normalized();
      }
      case TrajClass::kScanWithLoops: {
        const double phase = 2.0 * M_PI * static_cast<double>(cycles) * s;
        const double lx = noise::fbm3(2.0 * s, 0.5, 3.7, nseed) - 0.5;
        const double ly = noise::fbm3(0.5, 2.0 * s, 9.1, nseed) - 0.5;
        // axial component flips sign each half-cycle: back-and-forth sweep
        return Eigen::Vector3d(0.25 * lx, 0.25 * ly, std::cos(phase))
            .normalized();
      }
      case TrajClass::kSharp: {
        if (sharp_hold <= 0.0) {
          // jump to a new heading anywhere in the forward-ish hemisphere
          const double az = rng.uniform(0.0, 2.0 * M_PI);
          const double el = rng.uniform(-1.2, 1.2);
          const double fwd = rng.bernoulli(0.75) ? 1.0 : -1.0;
          sharp_dir = Eigen::Vector3d(std::cos(az) * std::cos(el),
                                      std::sin(az) * std::cos(el),
                                      fwd * std::abs(std::sin(el)) + 0.4 * fwd)
                          .normalized();
          sharp_hold = rng.uniform(6.0, 18.0);
        }
        sharp_hold -= 1.0;
        return sharp_dir;
      }
    }
    throw ConfigError("unknown trajectory class");
  };

  for (std::size_t i = 1; i < n; ++i) {
    Eigen::Vector3d u = direction_at(i - 1);
    Eigen::Vector3d next = pos[i - 1] + step * u;
    // reflect the lateral component off the safety cylinder
    const double rho = std::hypot(next.x(), next.y());
    if (rho > rho_max) {
      Eigen::Vector3d lat_step(u.x(), u.y(), 0.0);
      next = pos[i - 1] + step * (u - 2.0 * lat_step);
      const double rho2 = std::hypot(next.x(), next.y());
      if (rho2 > rho_max) {  // reflected step still escapes: pull inward
        const double scale = rho_max / rho2;
        next.x() *= scale;
        next.y() *= scale;
      }
    }
    pos[i] = next;
  }

  // orientations chase the (smoothed) travel direction
  Trajectory traj;
  traj.timestamps.resize(n);
  traj.poses.resize(n);
  Eigen::Vector3d look(0, 0, 1);
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Rng roll_rng(seed_mix(spec.seed, 12));
  const double smooth_keep = (spec.cls == TrajClass::kIncremental) ? 0.8 : 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    traj.timestamps[i] = static_cast<double>(i) / kFrameHz;
    if (i > 0 && step > 0.0) {
      Eigen::Vector3d u = (pos[i] - pos[i - 1]) / step;
      Eigen::Vector3d blended = smooth_keep * look + (1.0 - smooth_keep) * u;
      if (blended.norm() > 1e-6) look = blended.normalized();
      Eigen::Quaterniond target =
          Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), look);
      const double roll_scale =
          (spec.cls == TrajClass::kSharp) ? 0.6 : 0.1;
      target = target * Eigen::Quaterniond(Eigen::AngleAxisd(
                            roll_scale * (roll_rng.uniform01() - 0.5),
                            Eigen::Vector3d::UnitZ()));
      q = detail::clamp_rotate(q, target, spec.max_rot_step);
    }
    traj.poses[i].t = pos[i];
    traj.poses[i].q = canonical_sign(q.normalized());
  }
  return traj;
}

// Per-pair ground truth: delta_i = inverse(T_{i-1}) * T_i for i = 1..n-1.
inline std::vector<Pose> trajectory_relatives(const Trajectory& traj) {
  if (traj.size() < 2)
    throw ValidationError("relatives: need at least 2 poses");
  std::vector<Pose> rel;
  rel.reserve(traj.size() - 1);
  for (std::size_t i = 1; i < traj.size(); ++i)
    rel.push_back(pose_relative(traj.poses[i - 1], traj.poses[i]));
  return rel;
}

// Left-composition chain; the inverse of trajectory_relatives.
inline Trajectory integrate_relative(const Pose& initial,
                                     const std::vector<Pose>& relatives,
                                     const std::vector<double>& timestamps) {
  if (timestamps.size() != relatives.size() + 1)
    throw ValidationError("integrate: timestamps must cover every pose");
  Trajectory traj;
  traj.timestamps = timestamps;
  traj.poses.resize(relatives.size() + 1);
  traj.poses[0] = initial;
  traj.poses[0].q.normalize();
  for (std::size_t i = 0; i < relatives.size(); ++i) {
    const double qn = relatives[i].q.norm();
    if (!(std::abs(qn - 1.0) <= 1e-6))
      throw ValidationError("integrate: relative quaternion not unit length");
    traj.poses[i + 1] = pose_compose(traj.poses[i], relatives[i]);
  }
  return traj;
}

inline Trajectory integrate_relative(const Pose& initial,
                                     const std::vector<Pose>& relatives) {
  std::vector<double> ts(relatives.size() + 1);
  for (std::size_t i = 0; i < ts.size(); ++i)
    ts[i] = static_cast<double>(i) / kFrameHz;
  return integrate_relative(initial, relatives, ts);
}

}  // namespace capvo
