#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "capvo/errors.hpp"
#include "capvo/tensor.hpp"

// Tsai-Shah shape from shading. The scene model is a Lambertian surface lit
// by a single distant light along `light_direction`: with the height field Z
// and gradients p = dZ/dx, q = dZ/dy (backward differences),
//
//   R(p,q) = albedo * max(0, (1 + p*Ps + q*Qs))
//            / (sqrt(1+p^2+q^2) * sqrt(1+Ps^2+Qs^2))
//
// where (Ps,Qs) = (lx/lz, ly/lz). Each sweep applies one damped Newton step
// toward R(p,q) = I per pixel, Jacobi style (reads only the previous
// iterate), so sweeps are order-independent and bit-deterministic.
//
// The recovered surface is defined only up to an affine transform, so the
// output is z-scored over valid pixels and sign-fixed so that brighter
// pixels get smaller values (bright = close to the light = small camera
// depth). The affine coefficients are kept on the DepthMap so the raw
// surface can be reconstructed, e.g. to re-render the shading.

namespace capvo {

struct SfSConfig {
  std::array<double, 3> light_direction{0.0, 0.0, 1.0};
  double albedo = 1.0;
  int iterations = 50;
  double epsilon = 1e-2;  // Newton damping

  void validate() const {
    const double n = std::sqrt(light_direction[0] * light_direction[0] +
                               light_direction[1] * light_direction[1] +
                               light_direction[2] * light_direction[2]);
    if (std::abs(n - 1.0) > 1e-9)
      throw ConfigError("sfs: light_direction must be unit length");
    if (light_direction[2] <= 0.0)
      throw ConfigError("sfs: light must have a positive z component");
    if (!(albedo > 0.0)) throw ConfigError("sfs: albedo must be positive");
    if (iterations < 1) throw ConfigError("sfs: iterations must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("sfs: epsilon must be positive");
  }
};

template <typename T>
struct DepthMap {
  Tensor<T> values;                 // [H,W], z-scored, sign-canonical
  std::vector<std::uint8_t> valid;  // per pixel, row-major
  bool degenerate = false;          // no usable shading signal
  // affine bookkeeping: raw = sign * values * std + mean
  double norm_mean = 0.0;
  double norm_std = 1.0;
  double sign = 1.0;
};

// ITU BT.601 luma. Inputs must already be normalized to [0,1].
template <typename T>
Tensor<T> rgb_to_intensity(const Tensor<T>& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("rgb_to_intensity: image must be [3,H,W]");
  const std::size_t hw = image.dim(1) * image.dim(2);
  Tensor<T> out({image.dim(1), image.dim(2)});
  for (std::size_t i = 0; i < hw; ++i) {
    const double r = image[i], g = image[hw + i], b = image[2 * hw + i];
    if (r < 0.0 || r > 1.0 || g < 0.0 || g > 1.0 || b < 0.0 || b > 1.0)
      throw ValidationError("rgb_to_intensity: values outside [0,1]");
    double v = 0.299 * r + 0.587 * g + 0.114 * b;
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    out[i] = static_cast<T>(v);
  }
  return out;
}

namespace detail {

struct SfsLight {
  double ps, qs, norm;  // gradient-space light and sqrt(1+ps^2+qs^2)
};

// An exactly frontal light makes dR/dZ vanish at the flat initialization and
// the Newton iteration would never leave it; tilt such lights slightly.
inline SfsLight sfs_light(const SfSConfig& cfg) {
  double lx = cfg.light_direction[0], ly = cfg.light_direction[1],
         lz = cfg.light_direction[2];
  if (std::abs(lx) + std::abs(ly) < 1e-6) {
    lx = 0.01;
    ly = 0.01;
    lz = 1.0;
    const double n = std::sqrt(lx * lx + ly * ly + lz * lz);
    lx /= n;
    ly /= n;
    lz /= n;
  }
  const double ps = lx / lz, qs = ly / lz;
  return {ps, qs, std::sqrt(1.0 + ps * ps + qs * qs)};
}

inline double reflectance(double p, double q, double albedo,
                          const SfsLight& l) {
  const double num = 1.0 + p * l.ps + q * l.qs;
  if (num <= 0.0) return 0.0;
  return albedo * num / (std::sqrt(1.0 + p * p + q * q) * l.norm);
}

// dR/dZ(x,y) through the backward differences (dp/dZ = dq/dZ = 1).
inline double reflectance_dz(double p, double q, double albedo,
                             const SfsLight& l) {
  const double num = 1.0 + p * l.ps + q * l.qs;
  if (num <= 0.0) return 0.0;
  const double s2 = 1.0 + p * p + q * q;
  const double s = std::sqrt(s2);
  const double drdp = albedo * (l.ps / (s * l.norm) -
                                num * p / (s2 * s * l.norm));
  const double drdq = albedo * (l.qs / (s * l.norm) -
                                num * q / (s2 * s * l.norm));
  return drdp + drdq;
}

}  // namespace detail

// Predicted shading of a raw height field under cfg's light; used to verify
// a recovered surface explains the input image.
template <typename T>
Tensor<T> sfs_render_reflectance(const Tensor<T>& raw_height,
                                 const SfSConfig& cfg) {
  cfg.validate();
  if (raw_height.rank() != 2)
    throw DimensionError("sfs_render_reflectance: height must be [H,W]");
  const auto light = detail::sfs_light(cfg);
  const std::size_t h = raw_height.dim(0), w = raw_height.dim(1);
  Tensor<T> out({h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double z = raw_height(y, x);
      const double p = (x > 0) ? z - raw_height(y, x - 1) : 0.0;
      const double q = (y > 0) ? z - raw_height(y - 1, x) : 0.0;
      out(y, x) = static_cast<T>(detail::reflectance(p, q, cfg.albedo, light));
    }
  }
  return out;
}

template <typename T>
DepthMap<T> tsai_shah_depth(const Tensor<T>& intensity, const SfSConfig& cfg) {
  cfg.validate();
  if (intensity.rank() != 2)
    throw DimensionError("tsai_shah_depth: intensity must be [H,W]");
  const std::size_t h = intensity.dim(0), w = intensity.dim(1);
  const auto light = detail::sfs_light(cfg);

  DepthMap<T> out{Tensor<T>({h, w}), std::vector<std::uint8_t>(h * w, 0)};
  std::size_t valid_count = 0;
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = intensity[i];
    if (v < 0.0 || v > 1.0)
      throw ValidationError("tsai_shah_depth: intensity outside [0,1]");
    if (v > 1e-6) {
      out.valid[i] = 1;
      ++valid_count;
    }
  }
  if (valid_count == 0) {
    out.degenerate = true;
    std::fill(out.valid.begin(), out.valid.end(), 0);
    return out;
  }

  std::vector<double> z(h * w, 0.0), z_next(h * w, 0.0);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        const double zi = z[i];
        const double p = (x > 0) ? zi - z[i - 1] : 0.0;
        const double q = (y > 0) ? zi - z[i - w] : 0.0;
        const double f =
            detail::reflectance(p, q, cfg.albedo, light) - intensity[i];
        const double df = detail::reflectance_dz(p, q, cfg.albedo, light);
        const double gain = df / (cfg.epsilon + df * df);
        z_next[i] = zi - f * gain;
      }
    }
    z.swap(z_next);
  }

  double mean = 0.0;
  for (std::size_t i = 0; i < h * w; ++i)
    if (out.valid[i]) mean += z[i];
  mean /= static_cast<double>(valid_count);
  double var = 0.0;
  for (std::size_t i = 0; i < h * w; ++i)
    if (out.valid[i]) var += (z[i] - mean) * (z[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(valid_count));
  if (sd < 1e-12) {
    out.degenerate = true;
    std::fill(out.valid.begin(), out.valid.end(), 0);
    return out;
  }

  // z-score, then orient so brightness anti-correlates with depth
  double corr = 0.0;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (!out.valid[i]) continue;
    const double zn = (z[i] - mean) / sd;
    corr += zn * static_cast<double>(intensity[i]);
  }
  const double sign = (corr > 0.0) ? -1.0 : 1.0;
  // all pixels get normalized values (stats from valid ones) so the raw
  // surface reconstructs exactly; the mask records which are trustworthy
  for (std::size_t i = 0; i < h * w; ++i)
    out.values[i] = static_cast<T>(sign * (z[i] - mean) / sd);
  out.norm_mean = mean;
  out.norm_std = sd;
  out.sign = sign;
  return out;
}

// Recover the raw surface that tsai_shah_depth normalized away.
template <typename T>
Tensor<T> depth_raw_surface(const DepthMap<T>& dm) {
  Tensor<T> raw(dm.values.shape());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<T>(dm.sign * static_cast<double>(dm.values[i]) *
                                dm.norm_std +
                            dm.norm_mean);
  return raw;
}

// Algorithm step: stack two preprocessed RGBD frames channel-wise, with the
// training-set channel means removed. Channel order [R,G,B,D]a then [R,G,B,D]b.
template <typename T>
Tensor<T> stack_rgbd_pair(const Tensor<T>& rgb_a, const Tensor<T>& depth_a,
                          const Tensor<T>& rgb_b, const Tensor<T>& depth_b,
                          const Tensor<T>& channel_means) {
  if (rgb_a.rank() != 3 || rgb_a.dim(0) != 3)
    throw DimensionError("stack_rgbd_pair: rgb must be [3,H,W]");
  const std::size_t h = rgb_a.dim(1), w = rgb_a.dim(2);
  require_shape(rgb_b, {3, h, w}, "stack_rgbd_pair rgb_b");
  require_shape(depth_a, {h, w}, "stack_rgbd_pair depth_a");
  require_shape(depth_b, {h, w}, "stack_rgbd_pair depth_b");
  require_shape(channel_means, {8}, "stack_rgbd_pair channel_means");

  Tensor<T> out({8, h, w});
  const std::size_t hw = h * w;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i)
      out[c * hw + i] = rgb_a[c * hw + i] - channel_means[c];
  for (std::size_t i = 0; i < hw; ++i)
    out[3 * hw + i] = depth_a[i] - channel_means[3];
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i)
      out[(4 + c) * hw + i] = rgb_b[c * hw + i] - channel_means[4 + c];
  for (std::size_t i = 0; i < hw; ++i)
    out[7 * hw + i] = depth_b[i] - channel_means[7];
  return out;
}

}  // namespace capvo
