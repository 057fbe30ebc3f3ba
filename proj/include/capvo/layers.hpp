#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "capvo/rng.hpp"
#include "capvo/tensor.hpp"

// Differentiable primitives for the network: 2-d cross-correlation, max
// pooling, dense, sigmoid/tanh, channel concat and inverted dropout. Every
// forward has an explicit analytic backward; the finite-difference suite in
// tests/ is the authority on their correctness. All functions are pure.

namespace capvo {

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t pad,
                                std::size_t stride, const char* what) {
  const std::size_t padded = in + 2 * pad;
  if (k > padded)
    throw ConfigError(std::string(what) + ": window exceeds padded input");
  if ((padded - k) % stride != 0)
    throw ConfigError(std::string(what) + ": non-integral output size");
  return (padded - k) / stride + 1;
}

// Gather conv patches into a [oh*ow, c*kh*kw] row-major matrix. Padding
// contributes zeros. Reused by forward (GEMM) and backward (col2im mirror).
template <typename T>
void im2col(const Tensor<T>& input, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t oh,
            std::size_t ow, std::vector<T>& cols) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t patch = c * kh * kw;
  cols.assign(oh * ow * patch, T(0));
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      T* row = cols.data() + (oy * ow + ox) * patch;
      for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t dy = 0; dy < kh; ++dy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + dy) -
              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + dx) -
                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            row[(ci * kh + dy) * kw + dx] =
                input(ci, static_cast<std::size_t>(iy),
                      static_cast<std::size_t>(ix));
          }
        }
      }
    }
  }
}

// Scatter-add of the patch-matrix gradient back onto the input layout.
template <typename T>
void col2im(const std::vector<T>& cols, std::size_t c, std::size_t h,
            std::size_t w, std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t pad, std::size_t oh, std::size_t ow,
            Tensor<T>& input_grad) {
  const std::size_t patch = c * kh * kw;
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const T* row = cols.data() + (oy * ow + ox) * patch;
      for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t dy = 0; dy < kh; ++dy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + dy) -
              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dx = 0; dx < kw; ++dx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + dx) -
                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            input_grad(ci, static_cast<std::size_t>(iy),
                       static_cast<std::size_t>(ix)) +=
                row[(ci * kh + dy) * kw + dx];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip).

template <typename T>
struct ConvGrad {
  Tensor<T> input_grad;   // co-shaped with input
  Tensor<T> kernel_grad;  // co-shaped with kernels
  Tensor<T> bias_grad;    // co-shaped with bias
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernels,
                         const Tensor<T>& bias, std::size_t stride = 1,
                         std::size_t pad = 0) {
  if (input.rank() != 3) throw DimensionError("conv2d: input must be [C,H,W]");
  if (kernels.rank() != 4)
    throw DimensionError("conv2d: kernels must be [K,C,kh,kw]");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t k = kernels.dim(0), kh = kernels.dim(2),
                    kw = kernels.dim(3);
  if (kernels.dim(1) != c)
    throw DimensionError("conv2d: kernel channels != input channels");
  require_shape(bias, {k}, "conv2d bias");
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t oh = detail::conv_out_dim(h, kh, pad, stride, "conv2d");
  const std::size_t ow = detail::conv_out_dim(w, kw, pad, stride, "conv2d");

  const std::size_t patch = c * kh * kw;
  static thread_local std::vector<T> cols;
  detail::im2col(input, kh, kw, stride, pad, oh, ow, cols);

  Tensor<T> out({k, oh, ow});
  ConstMatMap<T> cols_m(cols.data(), static_cast<Eigen::Index>(oh * ow),
                        static_cast<Eigen::Index>(patch));
  ConstMatMap<T> kern_m(kernels.data(), static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(patch));
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prod =
      cols_m * kern_m.transpose();  // [oh*ow, k]
  for (std::size_t ki = 0; ki < k; ++ki) {
    const T b = bias[ki];
    for (std::size_t r = 0; r < oh * ow; ++r)
      out[ki * oh * ow + r] = prod(static_cast<Eigen::Index>(r),
                                   static_cast<Eigen::Index>(ki)) +
                              b;
  }
  return out;
}

template <typename T>
ConvGrad<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                            const Tensor<T>& out_grad, std::size_t stride = 1,
                            std::size_t pad = 0) {
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t k = kernels.dim(0), kh = kernels.dim(2),
                    kw = kernels.dim(3);
  if (kernels.dim(1) != c)
    throw DimensionError("conv2d_backward: kernel channels != input channels");
  const std::size_t oh = detail::conv_out_dim(h, kh, pad, stride, "conv2d");
  const std::size_t ow = detail::conv_out_dim(w, kw, pad, stride, "conv2d");
  require_shape(out_grad, {k, oh, ow}, "conv2d out_grad");

  const std::size_t patch = c * kh * kw;
  static thread_local std::vector<T> cols;
  detail::im2col(input, kh, kw, stride, pad, oh, ow, cols);

  // out_grad as [oh*ow, k]
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g(
      static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(k));
  for (std::size_t ki = 0; ki < k; ++ki)
    for (std::size_t r = 0; r < oh * ow; ++r)
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ki)) =
          out_grad[ki * oh * ow + r];

  ConvGrad<T> grads{Tensor<T>({c, h, w}), Tensor<T>({k, c, kh, kw}),
                    Tensor<T>({k})};

  for (std::size_t ki = 0; ki < k; ++ki) {
    T acc = T(0);
    for (std::size_t r = 0; r < oh * ow; ++r) acc += out_grad[ki * oh * ow + r];
    grads.bias_grad[ki] = acc;
  }

  ConstMatMap<T> cols_m(cols.data(), static_cast<Eigen::Index>(oh * ow),
                        static_cast<Eigen::Index>(patch));
  MatMap<T> kgrad_m(grads.kernel_grad.data(), static_cast<Eigen::Index>(k),
                    static_cast<Eigen::Index>(patch));
  kgrad_m = g.transpose() * cols_m;

  ConstMatMap<T> kern_m(kernels.data(), static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(patch));
  static thread_local std::vector<T> cols_grad;
  cols_grad.assign(oh * ow * patch, T(0));
  MatMap<T> cgrad_m(cols_grad.data(), static_cast<Eigen::Index>(oh * ow),
                    static_cast<Eigen::Index>(patch));
  cgrad_m = g * kern_m;
  detail::col2im(cols_grad, c, h, w, kh, kw, stride, pad, oh, ow,
                 grads.input_grad);
  return grads;
}

// ---------------------------------------------------------------------------
// Max pooling. Argmax indices (flat over the input) are recorded so backward
// routes gradient only to winners; ties break to the lowest linear index.

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // one flat input index per output cell
};

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, std::size_t window,
                                 std::size_t stride, std::size_t pad = 0) {
  if (input.rank() != 3)
    throw DimensionError("maxpool: input must be [C,H,W]");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (stride == 0) throw ConfigError("maxpool: stride must be positive");
  const std::size_t oh = detail::conv_out_dim(h, window, pad, stride, "maxpool");
  const std::size_t ow = detail::conv_out_dim(w, window, pad, stride, "maxpool");

  MaxPoolResult<T> res{Tensor<T>({c, oh, ow}),
                       std::vector<std::size_t>(c * oh * ow)};
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = 0;
        bool found = false;
        for (std::size_t dy = 0; dy < window; ++dy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + dy) -
              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + dx) -
                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t flat =
                (ci * h + static_cast<std::size_t>(iy)) * w +
                static_cast<std::size_t>(ix);
            const T v = input[flat];
            if (!found || v > best) {
              best = v;
              best_idx = flat;
              found = true;
            }
          }
        }
        // Window fully inside padding cannot happen: window <= padded input
        // and windows always overlap the valid region by construction.
        res.output(ci, oy, ox) = best;
        res.argmax[(ci * oh + oy) * ow + ox] = best_idx;
      }
    }
  }
  return res;
}

template <typename T>
Tensor<T> maxpool_backward(const std::vector<std::size_t>& argmax,
                           const Tensor<T>& out_grad,
                           const std::vector<std::size_t>& input_shape) {
  if (argmax.size() != out_grad.size())
    throw DimensionError("maxpool_backward: argmax/out_grad size mismatch");
  Tensor<T> input_grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    input_grad[argmax[i]] += out_grad[i];
  return input_grad;
}

// ---------------------------------------------------------------------------
// Dense (affine) layer: y = W x + b.

template <typename T>
struct DenseGrad {
  Tensor<T> input_grad;
  Tensor<T> weight_grad;
  Tensor<T> bias_grad;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight,
                        const Tensor<T>& bias) {
  if (input.rank() != 1 || weight.rank() != 2)
    throw DimensionError("dense: input must be [N], weight [M,N]");
  const std::size_t m = weight.dim(0), n = weight.dim(1);
  if (input.dim(0) != n) throw DimensionError("dense: input length != N");
  require_shape(bias, {m}, "dense bias");
  Tensor<T> out({m});
  ConstMatMap<T> w(weight.data(), static_cast<Eigen::Index>(m),
                   static_cast<Eigen::Index>(n));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(
      input.data(), static_cast<Eigen::Index>(n));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(
      out.data(), static_cast<Eigen::Index>(m));
  y = w * x;
  for (std::size_t i = 0; i < m; ++i) out[i] += bias[i];
  return out;
}

template <typename T>
DenseGrad<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight,
                            const Tensor<T>& out_grad) {
  const std::size_t m = weight.dim(0), n = weight.dim(1);
  require_shape(out_grad, {m}, "dense out_grad");
  DenseGrad<T> g{Tensor<T>({n}), Tensor<T>({m, n}), out_grad};
  ConstMatMap<T> w(weight.data(), static_cast<Eigen::Index>(m),
                   static_cast<Eigen::Index>(n));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> go(
      out_grad.data(), static_cast<Eigen::Index>(m));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(
      input.data(), static_cast<Eigen::Index>(n));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gi(
      g.input_grad.data(), static_cast<Eigen::Index>(n));
  gi = w.transpose() * go;
  MatMap<T> gw(g.weight_grad.data(), static_cast<Eigen::Index>(m),
               static_cast<Eigen::Index>(n));
  gw = go * x.transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities. Backward uses the forward output:
// sigma' = y(1-y), tanh' = 1-y^2.

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-input[i]));
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& out_grad) {
  if (!output.same_shape(out_grad))
    throw DimensionError("sigmoid_backward: shape mismatch");
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i)
    g[i] = out_grad[i] * output[i] * (T(1) - output[i]);
  return g;
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
  return out;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& output, const Tensor<T>& out_grad) {
  if (!output.same_shape(out_grad))
    throw DimensionError("tanh_backward: shape mismatch");
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i)
    g[i] = out_grad[i] * (T(1) - output[i] * output[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Channel concatenation; backward is a lossless split.

template <typename T>
Tensor<T> channel_concat(const std::vector<const Tensor<T>*>& inputs) {
  if (inputs.empty()) throw DimensionError("concat: no inputs");
  const std::size_t h = inputs[0]->dim(1), w = inputs[0]->dim(2);
  std::size_t total_c = 0;
  for (const auto* t : inputs) {
    if (t->rank() != 3 || t->dim(1) != h || t->dim(2) != w)
      throw DimensionError("concat: spatial dims differ");
    total_c += t->dim(0);
  }
  Tensor<T> out({total_c, h, w});
  std::size_t offset = 0;
  for (const auto* t : inputs) {
    std::copy(t->data(), t->data() + t->size(), out.data() + offset);
    offset += t->size();
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> channel_split(const Tensor<T>& grad,
                                     const std::vector<std::size_t>& channels) {
  std::size_t sum = 0;
  for (std::size_t c : channels) sum += c;
  if (grad.rank() != 3 || grad.dim(0) != sum)
    throw DimensionError("split: channel counts do not sum to input");
  const std::size_t h = grad.dim(1), w = grad.dim(2);
  std::vector<Tensor<T>> parts;
  parts.reserve(channels.size());
  std::size_t offset = 0;
  for (std::size_t c : channels) {
    Tensor<T> part({c, h, w});
    std::copy(grad.data() + offset, grad.data() + offset + part.size(),
              part.data());
    offset += part.size();
    parts.push_back(std::move(part));
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode is the identity.

enum class DropoutMode { kTrain, kEval };

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  std::vector<std::uint8_t> mask;  // 1 = kept
};

template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& input, double rate,
                                 std::uint64_t seed, DropoutMode mode) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
  DropoutResult<T> res{Tensor<T>(input.shape()),
                       std::vector<std::uint8_t>(input.size(), 1)};
  if (mode == DropoutMode::kEval || rate == 0.0) {
    res.output = input;
    return res;
  }
  Rng rng(seed);
  const T scale = T(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rng.uniform01() < rate) {
      res.mask[i] = 0;
      res.output[i] = T(0);
    } else {
      res.output[i] = input[i] * scale;
    }
  }
  return res;
}

template <typename T>
Tensor<T> dropout_backward(const std::vector<std::uint8_t>& mask, double rate,
                           const Tensor<T>& out_grad, DropoutMode mode) {
  if (mode == DropoutMode::kEval || rate == 0.0) return out_grad;
  if (mask.size() != out_grad.size())
    throw DimensionError("dropout_backward: mask size mismatch");
  Tensor<T> g(out_grad.shape());
  const T scale = T(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < out_grad.size(); ++i)
    g[i] = mask[i] ? out_grad[i] * scale : T(0);
  return g;
}

// Flatten to 1-d (copy; the network graph is small enough that views are not
// worth the aliasing rules).
template <typename T>
Tensor<T> flatten(const Tensor<T>& t) {
  return t.reshaped({t.size()});
}

}  // namespace capvo
