#pragma once

#include <Eigen/Dense>

#include "capvo/layers.hpp"
#include "capvo/rng.hpp"
#include "capvo/tensor.hpp"

// Single LSTM cell. Gate order and equations:
//   z = [x, h_prev]
//   f = sigma(W_f z + b_f)        forget
//   i = sigma(W_i z + b_i)        input
//   g = tanh (W_g z + b_g)        candidate
//   o = sigma(W_o z + b_o)        output
//   c = f*c_prev + i*g
//   h = o*tanh(c)
// Backward consumes the forward cache and accumulates parameter gradients so
// truncated BPTT can sum over timesteps.

namespace capvo {

template <typename T>
struct LstmParams {
  Tensor<T> w_f, w_i, w_g, w_o;  // each [hidden, input+hidden]
  Tensor<T> b_f, b_i, b_g, b_o;  // each [hidden]

  std::size_t hidden_size() const { return b_f.dim(0); }
  std::size_t input_size() const { return w_f.dim(1) - b_f.dim(0); }
};

template <typename T>
struct LstmState {
  Tensor<T> h, c;
};

template <typename T>
struct LstmCache {
  Tensor<T> z;  // concatenated [x, h_prev]
  Tensor<T> f, i, g, o;
  Tensor<T> c_prev, tanh_c;
};

template <typename T>
struct LstmStepGrad {
  Tensor<T> dx;
  LstmState<T> dprev;  // gradient w.r.t. incoming h and c
};

template <typename T>
LstmState<T> lstm_zero_state(std::size_t hidden) {
  return {Tensor<T>({hidden}), Tensor<T>({hidden})};
}

// Uniform(-0.08, 0.08) weights, zero biases except forget bias +1 so cells
// start out remembering.
template <typename T>
LstmParams<T> lstm_init(std::size_t input, std::size_t hidden, Rng& rng) {
  const std::size_t z = input + hidden;
  LstmParams<T> p{Tensor<T>({hidden, z}), Tensor<T>({hidden, z}),
                  Tensor<T>({hidden, z}), Tensor<T>({hidden, z}),
                  Tensor<T>({hidden}),    Tensor<T>({hidden}),
                  Tensor<T>({hidden}),    Tensor<T>({hidden})};
  for (Tensor<T>* w : {&p.w_f, &p.w_i, &p.w_g, &p.w_o})
    for (std::size_t k = 0; k < w->size(); ++k)
      (*w)[k] = static_cast<T>(rng.uniform(-0.08, 0.08));
  p.b_f.fill(T(1));
  return p;
}

template <typename T>
LstmParams<T> lstm_zero_grads(const LstmParams<T>& like) {
  return {Tensor<T>(like.w_f.shape()), Tensor<T>(like.w_i.shape()),
          Tensor<T>(like.w_g.shape()), Tensor<T>(like.w_o.shape()),
          Tensor<T>(like.b_f.shape()), Tensor<T>(like.b_i.shape()),
          Tensor<T>(like.b_g.shape()), Tensor<T>(like.b_o.shape())};
}

namespace detail {

template <typename T>
Tensor<T> gate_affine(const Tensor<T>& w, const Tensor<T>& b,
                      const Tensor<T>& z) {
  Tensor<T> out({w.dim(0)});
  ConstMatMap<T> wm(w.data(), static_cast<Eigen::Index>(w.dim(0)),
                    static_cast<Eigen::Index>(w.dim(1)));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> zv(
      z.data(), static_cast<Eigen::Index>(z.dim(0)));
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> ov(
      out.data(), static_cast<Eigen::Index>(out.dim(0)));
  ov = wm * zv;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
  return out;
}

}  // namespace detail

template <typename T>
LstmState<T> lstm_step_forward(const LstmParams<T>& params, const Tensor<T>& x,
                               const LstmState<T>& prev, LstmCache<T>& cache) {
  const std::size_t nh = params.hidden_size(), nx = params.input_size();
  if (x.rank() != 1 || x.dim(0) != nx)
    throw DimensionError("lstm: input size mismatch");
  require_shape(prev.h, {nh}, "lstm prev.h");
  require_shape(prev.c, {nh}, "lstm prev.c");

  cache.z = Tensor<T>({nx + nh});
  std::copy(x.data(), x.data() + nx, cache.z.data());
  std::copy(prev.h.data(), prev.h.data() + nh, cache.z.data() + nx);

  cache.f = sigmoid_forward(detail::gate_affine(params.w_f, params.b_f, cache.z));
  cache.i = sigmoid_forward(detail::gate_affine(params.w_i, params.b_i, cache.z));
  cache.g = tanh_forward(detail::gate_affine(params.w_g, params.b_g, cache.z));
  cache.o = sigmoid_forward(detail::gate_affine(params.w_o, params.b_o, cache.z));
  cache.c_prev = prev.c;

  LstmState<T> next{Tensor<T>({nh}), Tensor<T>({nh})};
  for (std::size_t k = 0; k < nh; ++k)
    next.c[k] = cache.f[k] * prev.c[k] + cache.i[k] * cache.g[k];
  cache.tanh_c = tanh_forward(next.c);
  for (std::size_t k = 0; k < nh; ++k) next.h[k] = cache.o[k] * cache.tanh_c[k];
  return next;
}

// dh/dc are the gradients arriving at this step's outputs (loss plus any
// contribution already accumulated from the following step).
template <typename T>
LstmStepGrad<T> lstm_step_backward(const LstmParams<T>& params,
                                   const LstmCache<T>& cache,
                                   const Tensor<T>& dh, const Tensor<T>& dc,
                                   LstmParams<T>& grads) {
  const std::size_t nh = params.hidden_size(), nx = params.input_size();
  require_shape(dh, {nh}, "lstm dh");
  require_shape(dc, {nh}, "lstm dc");

  Tensor<T> da_f({nh}), da_i({nh}), da_g({nh}), da_o({nh}), dc_prev({nh});
  for (std::size_t k = 0; k < nh; ++k) {
    const T tc = cache.tanh_c[k];
    const T dck = dc[k] + dh[k] * cache.o[k] * (T(1) - tc * tc);
    const T f = cache.f[k], i = cache.i[k], g = cache.g[k], o = cache.o[k];
    da_o[k] = dh[k] * tc * o * (T(1) - o);
    da_f[k] = dck * cache.c_prev[k] * f * (T(1) - f);
    da_i[k] = dck * g * i * (T(1) - i);
    da_g[k] = dck * i * (T(1) - g * g);
    dc_prev[k] = dck * f;
  }

  Tensor<T> dz({nx + nh});
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dzv(
      dz.data(), static_cast<Eigen::Index>(nx + nh));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> zv(
      cache.z.data(), static_cast<Eigen::Index>(nx + nh));

  const Tensor<T>* das[] = {&da_f, &da_i, &da_g, &da_o};
  const Tensor<T>* ws[] = {&params.w_f, &params.w_i, &params.w_g, &params.w_o};
  Tensor<T>* gws[] = {&grads.w_f, &grads.w_i, &grads.w_g, &grads.w_o};
  Tensor<T>* gbs[] = {&grads.b_f, &grads.b_i, &grads.b_g, &grads.b_o};
  for (int gate = 0; gate < 4; ++gate) {
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> da(
        das[gate]->data(), static_cast<Eigen::Index>(nh));
    ConstMatMap<T> w(ws[gate]->data(), static_cast<Eigen::Index>(nh),
                     static_cast<Eigen::Index>(nx + nh));
    MatMap<T> gw(gws[gate]->data(), static_cast<Eigen::Index>(nh),
                 static_cast<Eigen::Index>(nx + nh));
    gw.noalias() += da * zv.transpose();
    dzv.noalias() += w.transpose() * da;
    for (std::size_t k = 0; k < nh; ++k) (*gbs[gate])[k] += (*das[gate])[k];
  }

  LstmStepGrad<T> out{Tensor<T>({nx}), {Tensor<T>({nh}), std::move(dc_prev)}};
  std::copy(dz.data(), dz.data() + nx, out.dx.data());
  std::copy(dz.data() + nx, dz.data() + nx + nh, out.dprev.h.data());
  return out;
}

}  // namespace capvo
