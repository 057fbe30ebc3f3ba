#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "capvo/errors.hpp"
#include "capvo/pose.hpp"
#include "capvo/rng.hpp"
#include "capvo/tensor.hpp"

// Synthetic endoscopy scene: a wobbly tube along world +Z, Lambertian walls,
// a point light riding at the camera center (endoscope geometry). The wall is
// the zero level set of
//   F(p) = sqrt(px^2+py^2) - R(theta, z)
//   R(theta, z) = radius * (1 + wobble*n1(z)) * (1 + bump*n2(theta, z))
// with seeded value noise n1, n2. Rays are marched from the camera and
// refined by bisection; shading is albedo(p) * max(0, n.L) / (1+falloff*d^2)
// with a procedural albedo texture, tinted per channel. True depth (camera-z
// of the hit point) is returned alongside the image.

namespace capvo {

struct SceneConfig {
  std::size_t image_h = 64;
  std::size_t image_w = 64;
  double focal_px = 48.0;
  double principal_x = -1.0;  // negative = image center
  double principal_y = -1.0;

  double tube_radius = 0.5;       // meters
  double radius_wobble = 0.10;    // axial radius modulation, relative
  double bump_amplitude = 0.06;   // angular/axial surface bumps, relative
  double texture_amplitude = 0.3; // albedo contrast around albedo_base
  double albedo_base = 0.7;
  double falloff = 0.5;           // quadratic light falloff coefficient
  std::array<double, 3> tint{1.0, 0.6, 0.5};
  std::uint64_t texture_seed = 1;

  double px() const {
    return principal_x >= 0.0 ? principal_x : (image_w - 1) / 2.0;
  }
  double py() const {
    return principal_y >= 0.0 ? principal_y : (image_h - 1) / 2.0;
  }

  void validate() const {
    if (image_h == 0 || image_w == 0)
      throw ConfigError("scene: image dims must be positive");
    if (!(focal_px > 0.0)) throw ConfigError("scene: focal must be positive");
    if (!(tube_radius > 0.0))
      throw ConfigError("scene: tube radius must be positive");
    if (radius_wobble < 0.0 || radius_wobble > 0.4 || bump_amplitude < 0.0 ||
        bump_amplitude > 0.4)
      throw ConfigError("scene: relative amplitudes must be in [0, 0.4]");
    if (texture_amplitude < 0.0 || texture_amplitude > albedo_base ||
        albedo_base + texture_amplitude > 1.0)
      throw ConfigError("scene: albedo range must stay inside (0, 1]");
    if (falloff < 0.0) throw ConfigError("scene: falloff must be >= 0");
  }
};

namespace noise {

inline double to_unit(std::uint64_t h) { return (h >> 11) * 0x1.0p-53; }

inline double lattice(std::int64_t x, std::int64_t y, std::int64_t z,
                      std::uint64_t seed) {
  return to_unit(seed_mix(seed_mix(seed, static_cast<std::uint64_t>(x)),
                          static_cast<std::uint64_t>(y),
                          static_cast<std::uint64_t>(z)));
}

inline double smooth(double u) { return u * u * (3.0 - 2.0 * u); }

// Trilinear value noise in [0,1].
inline double value3(double x, double y, double z, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double ux = smooth(x - fx), uy = smooth(y - fy), uz = smooth(z - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wgt = (dx ? ux : 1.0 - ux) * (dy ? uy : 1.0 - uy) *
                           (dz ? uz : 1.0 - uz);
        acc += wgt * lattice(ix + dx, iy + dy, iz + dz, seed);
      }
  return acc;
}

// Two-octave fractal variant, still in [0,1].
inline double fbm3(double x, double y, double z, std::uint64_t seed) {
  return (value3(x, y, z, seed) +
          0.5 * value3(2.0 * x, 2.0 * y, 2.0 * z, seed ^ 0x9e3779b97f4a7c15ull)) /
         1.5;
}

}  // namespace noise

namespace detail {

// Radius field and implicit wall function. theta enters through (cos, sin)
// so the texture is seamless around the tube.
inline double tube_radius_at(const SceneConfig& s, double theta, double z) {
  const double n1 = noise::fbm3(0.35 * z, 0.0, 0.0, s.texture_seed + 101);
  const double n2 = noise::fbm3(1.5 * std::cos(theta), 1.5 * std::sin(theta),
                                0.8 * z, s.texture_seed + 202);
  return s.tube_radius * (1.0 + s.radius_wobble * (2.0 * n1 - 1.0)) *
         (1.0 + s.bump_amplitude * (2.0 * n2 - 1.0));
}

inline double wall_f(const SceneConfig& s, const Eigen::Vector3d& p) {
  const double r = std::hypot(p.x(), p.y());
  const double theta = std::atan2(p.y(), p.x());
  return r - tube_radius_at(s, theta, p.z());
}

inline double albedo_at(const SceneConfig& s, const Eigen::Vector3d& p) {
  const double theta = std::atan2(p.y(), p.x());
  const double n = noise::fbm3(2.2 * std::cos(theta), 2.2 * std::sin(theta),
                               1.7 * p.z(), s.texture_seed + 303);
  return s.albedo_base + s.texture_amplitude * (2.0 * n - 1.0);
}

inline Eigen::Vector3d wall_normal(const SceneConfig& s,
                                   const Eigen::Vector3d& p) {
  const double h = 1e-4;
  Eigen::Vector3d g;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d lo = p, hi = p;
    lo[a] -= h;
    hi[a] += h;
    g[a] = (wall_f(s, hi) - wall_f(s, lo)) / (2.0 * h);
  }
  // F grows outward; the visible side faces inward
  return (-g).normalized();
}

}  // namespace detail

struct RenderedFrame {
  Tensor<float> image;  // [3,H,W], values in [0,1]
  Tensor<float> depth;  // [H,W], camera-frame z in meters
};

// March a frame. The camera must sit strictly inside the tube.
inline RenderedFrame render_frame(const Pose& pose, const SceneConfig& scene) {
  scene.validate();
  const Eigen::Vector3d origin = pose.t;
  const double margin = 0.05 * scene.tube_radius;
  if (detail::wall_f(scene, origin) > -margin)
    throw GeometryError("render: camera outside or touching the tube wall");

  const std::size_t h = scene.image_h, w = scene.image_w;
  RenderedFrame out{Tensor<float>({3, h, w}), Tensor<float>({h, w})};
  const double t_max = 16.0 * scene.tube_radius;
  const double dt = 0.05 * scene.tube_radius;
  const std::size_t hw = h * w;

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const Eigen::Vector3d dir_cam(
          (static_cast<double>(x) - scene.px()) / scene.focal_px,
          (static_cast<double>(y) - scene.py()) / scene.focal_px, 1.0);
      const Eigen::Vector3d d = (pose.q * dir_cam).normalized();
      const double cam_z_per_t = dir_cam.normalized().z();

      // coarse march to bracket the wall crossing, then bisect
      double t_lo = 0.0, t_hi = -1.0;
      double t = dt;
      while (t <= t_max) {
        if (detail::wall_f(scene, origin + t * d) >= 0.0) {
          t_hi = t;
          break;
        }
        t_lo = t;
        t += dt;
      }

      double intensity = 0.0;
      double depth = t_max * cam_z_per_t;
      if (t_hi > 0.0) {
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (t_lo + t_hi);
          if (detail::wall_f(scene, origin + mid * d) >= 0.0)
            t_hi = mid;
          else
            t_lo = mid;
        }
        const double t_hit = 0.5 * (t_lo + t_hi);
        const Eigen::Vector3d p = origin + t_hit * d;
        const Eigen::Vector3d n = detail::wall_normal(scene, p);
        const Eigen::Vector3d to_light = origin - p;
        const double dist = to_light.norm();
        const double lambert = std::max(0.0, n.dot(to_light / dist));
        intensity = detail::albedo_at(scene, p) * lambert /
                    (1.0 + scene.falloff * dist * dist);
        depth = t_hit * cam_z_per_t;
      }

      out.depth[y * w + x] = static_cast<float>(depth);
      for (int c = 0; c < 3; ++c) {
        double v = intensity * scene.tint[c];
        if (v > 1.0) v = 1.0;
        out.image[c * hw + y * w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace capvo
