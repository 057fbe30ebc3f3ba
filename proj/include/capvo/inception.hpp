#pragma once

#include <array>

#include "capvo/layers.hpp"
#include "capvo/rng.hpp"
#include "capvo/tensor.hpp"

// One inception block: four parallel branches over the same input
//   1: 1x1 conv
//   2: 1x1 reduce -> 3x3 conv (pad 1)
//   3: 1x1 reduce -> 5x5 conv (pad 2)
//   4: 3x3 stride-1 maxpool (pad 1) -> 1x1 conv
// All branches preserve the spatial size; their outputs are concatenated on
// the channel axis and the block ends with a 2x2 stride-2 maxpool. The convs
// are linear; the pooling stages supply the nonlinearity.

namespace capvo {

template <typename T>
struct InceptionBlockParams {
  Tensor<T> b1_w, b1_b;            // [w1, C, 1, 1], [w1]
  Tensor<T> b2_reduce_w, b2_reduce_b;  // [w2, C, 1, 1], [w2]
  Tensor<T> b2_w, b2_b;            // [w2, w2, 3, 3], [w2]
  Tensor<T> b3_reduce_w, b3_reduce_b;  // [w3, C, 1, 1], [w3]
  Tensor<T> b3_w, b3_b;            // [w3, w3, 5, 5], [w3]
  Tensor<T> b4_w, b4_b;            // [w4, C, 1, 1], [w4]

  std::size_t in_channels() const { return b1_w.dim(1); }
  std::size_t out_channels() const {
    return b1_w.dim(0) + b2_w.dim(0) + b3_w.dim(0) + b4_w.dim(0);
  }
};

template <typename T>
struct InceptionCache {
  Tensor<T> input;
  Tensor<T> b2_mid, b3_mid;            // reduce outputs feeding 3x3 / 5x5
  Tensor<T> b4_pooled;                 // 3x3 pool output feeding the 1x1
  std::vector<std::size_t> b4_argmax;  // for the branch pool
  std::vector<std::size_t> out_argmax; // for the closing 2x2 pool
  std::array<std::size_t, 4> branch_channels{};
  std::vector<std::size_t> concat_shape;
};

namespace detail {

// Glorot uniform for a conv kernel [K, C, kh, kw].
template <typename T>
void glorot_fill(Tensor<T>& w, Rng& rng) {
  const std::size_t k = w.dim(0), c = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const double fan_in = static_cast<double>(c * kh * kw);
  const double fan_out = static_cast<double>(k * kh * kw);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (std::size_t idx = 0; idx < w.size(); ++idx)
    w[idx] = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace detail

template <typename T>
InceptionBlockParams<T> inception_init(std::size_t in_channels,
                                       const std::array<std::size_t, 4>& widths,
                                       Rng& rng) {
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("inception: zero branch width");
  const std::size_t w1 = widths[0], w2 = widths[1], w3 = widths[2],
                    w4 = widths[3];
  InceptionBlockParams<T> p{
      Tensor<T>({w1, in_channels, 1, 1}), Tensor<T>({w1}),
      Tensor<T>({w2, in_channels, 1, 1}), Tensor<T>({w2}),
      Tensor<T>({w2, w2, 3, 3}),          Tensor<T>({w2}),
      Tensor<T>({w3, in_channels, 1, 1}), Tensor<T>({w3}),
      Tensor<T>({w3, w3, 5, 5}),          Tensor<T>({w3}),
      Tensor<T>({w4, in_channels, 1, 1}), Tensor<T>({w4})};
  detail::glorot_fill(p.b1_w, rng);
  detail::glorot_fill(p.b2_reduce_w, rng);
  detail::glorot_fill(p.b2_w, rng);
  detail::glorot_fill(p.b3_reduce_w, rng);
  detail::glorot_fill(p.b3_w, rng);
  detail::glorot_fill(p.b4_w, rng);
  return p;
}

template <typename T>
InceptionBlockParams<T> inception_zero_grads(const InceptionBlockParams<T>& like) {
  return {Tensor<T>(like.b1_w.shape()),        Tensor<T>(like.b1_b.shape()),
          Tensor<T>(like.b2_reduce_w.shape()), Tensor<T>(like.b2_reduce_b.shape()),
          Tensor<T>(like.b2_w.shape()),        Tensor<T>(like.b2_b.shape()),
          Tensor<T>(like.b3_reduce_w.shape()), Tensor<T>(like.b3_reduce_b.shape()),
          Tensor<T>(like.b3_w.shape()),        Tensor<T>(like.b3_b.shape()),
          Tensor<T>(like.b4_w.shape()),        Tensor<T>(like.b4_b.shape())};
}

template <typename T>
Tensor<T> inception_forward(const Tensor<T>& input,
                            const InceptionBlockParams<T>& params,
                            InceptionCache<T>& cache) {
  if (input.rank() != 3) throw DimensionError("inception: input must be [C,H,W]");
  if (input.dim(0) != params.in_channels())
    throw ConfigError("inception: input channels do not match params");
  if (input.dim(1) % 2 != 0 || input.dim(2) % 2 != 0)
    throw ConfigError("inception: spatial dims must be even for 2x2 pooling");

  cache.input = input;
  Tensor<T> o1 = conv2d_forward(input, params.b1_w, params.b1_b);
  cache.b2_mid = conv2d_forward(input, params.b2_reduce_w, params.b2_reduce_b);
  Tensor<T> o2 = conv2d_forward(cache.b2_mid, params.b2_w, params.b2_b, 1, 1);
  cache.b3_mid = conv2d_forward(input, params.b3_reduce_w, params.b3_reduce_b);
  Tensor<T> o3 = conv2d_forward(cache.b3_mid, params.b3_w, params.b3_b, 1, 2);
  auto pooled = maxpool_forward(input, 3, 1, 1);
  cache.b4_pooled = std::move(pooled.output);
  cache.b4_argmax = std::move(pooled.argmax);
  Tensor<T> o4 = conv2d_forward(cache.b4_pooled, params.b4_w, params.b4_b);

  cache.branch_channels = {o1.dim(0), o2.dim(0), o3.dim(0), o4.dim(0)};
  Tensor<T> concat = channel_concat<T>({&o1, &o2, &o3, &o4});
  cache.concat_shape = concat.shape();
  auto down = maxpool_forward(concat, 2, 2);
  cache.out_argmax = std::move(down.argmax);
  return std::move(down.output);
}

// Returns the gradient w.r.t. the block input; parameter gradients are
// accumulated into `grads`.
template <typename T>
Tensor<T> inception_backward(const InceptionBlockParams<T>& params,
                             const InceptionCache<T>& cache,
                             const Tensor<T>& out_grad,
                             InceptionBlockParams<T>& grads) {
  if (cache.concat_shape.empty())
    throw StateError("inception_backward: no forward cache");
  Tensor<T> concat_grad =
      maxpool_backward(cache.out_argmax, out_grad, cache.concat_shape);
  std::vector<Tensor<T>> branch_grads = channel_split(
      concat_grad, {cache.branch_channels[0], cache.branch_channels[1],
                    cache.branch_channels[2], cache.branch_channels[3]});

  Tensor<T> input_grad(cache.input.shape());
  auto add_into = [](Tensor<T>& acc, const Tensor<T>& g) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
  };

  {
    auto g = conv2d_backward(cache.input, params.b1_w, branch_grads[0]);
    add_into(grads.b1_w, g.kernel_grad);
    add_into(grads.b1_b, g.bias_grad);
    add_into(input_grad, g.input_grad);
  }
  {
    auto g3 = conv2d_backward(cache.b2_mid, params.b2_w, branch_grads[1], 1, 1);
    add_into(grads.b2_w, g3.kernel_grad);
    add_into(grads.b2_b, g3.bias_grad);
    auto gr = conv2d_backward(cache.input, params.b2_reduce_w, g3.input_grad);
    add_into(grads.b2_reduce_w, gr.kernel_grad);
    add_into(grads.b2_reduce_b, gr.bias_grad);
    add_into(input_grad, gr.input_grad);
  }
  {
    auto g5 = conv2d_backward(cache.b3_mid, params.b3_w, branch_grads[2], 1, 2);
    add_into(grads.b3_w, g5.kernel_grad);
    add_into(grads.b3_b, g5.bias_grad);
    auto gr = conv2d_backward(cache.input, params.b3_reduce_w, g5.input_grad);
    add_into(grads.b3_reduce_w, gr.kernel_grad);
    add_into(grads.b3_reduce_b, gr.bias_grad);
    add_into(input_grad, gr.input_grad);
  }
  {
    auto g = conv2d_backward(cache.b4_pooled, params.b4_w, branch_grads[3]);
    add_into(grads.b4_w, g.kernel_grad);
    add_into(grads.b4_b, g.bias_grad);
    Tensor<T> pool_grad =
        maxpool_backward(cache.b4_argmax, g.input_grad, cache.input.shape());
    add_into(input_grad, pool_grad);
  }
  return input_grad;
}

// Works on const and mutable params alike; visit order is the checkpoint
// record order.
template <typename P, typename Fn>
void inception_for_each_tensor(P& p, const std::string& prefix, Fn&& fn) {
  fn(prefix + ".b1.w", p.b1_w);
  fn(prefix + ".b1.b", p.b1_b);
  fn(prefix + ".b2.reduce_w", p.b2_reduce_w);
  fn(prefix + ".b2.reduce_b", p.b2_reduce_b);
  fn(prefix + ".b2.w", p.b2_w);
  fn(prefix + ".b2.b", p.b2_b);
  fn(prefix + ".b3.reduce_w", p.b3_reduce_w);
  fn(prefix + ".b3.reduce_b", p.b3_reduce_b);
  fn(prefix + ".b3.w", p.b3_w);
  fn(prefix + ".b3.b", p.b3_b);
  fn(prefix + ".b4.w", p.b4_w);
  fn(prefix + ".b4.b", p.b4_b);
}

}  // namespace capvo
