#pragma once

#include <cmath>
#include <cstdint>

#include "capvo/model.hpp"
#include "capvo/tensor.hpp"

// Adam optimizer. The default update is the form this model family trains
// with:
//   m <- b1*m + (1-b1)*g
//   v <- b2*v + (1-b2)*g^2
//   W <- W - alpha * (sqrt(1-b2^t)/(1-b1^t)) * m / (sqrt(v) + eps)
// where t counts completed steps (first call sees t = 1). kStandard switches
// to the textbook variant, W <- W - alpha * m_hat / (sqrt(v_hat) + eps) with
// m_hat = m/(1-b1^t), v_hat = v/(1-b2^t), for comparison runs. The two agree
// only when eps = 0.

namespace capvo {

enum class AdamForm { kPaper, kStandard };

struct AdamHyper {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  AdamForm form = AdamForm::kPaper;
};

template <typename T>
struct AdamState {
  NetworkParams<T> m, v;
  std::uint64_t t = 0;
  AdamHyper hyper;
};

template <typename T>
AdamState<T> adam_init(const NetworkParams<T>& like, const AdamHyper& hyper) {
  if (hyper.alpha <= 0.0 || hyper.epsilon < 0.0)
    throw ConfigError("adam: alpha must be positive, epsilon non-negative");
  if (hyper.beta1 < 0.0 || hyper.beta1 >= 1.0 || hyper.beta2 < 0.0 ||
      hyper.beta2 >= 1.0)
    throw ConfigError("adam: betas must be in [0,1)");
  return {net_zero_grads(like), net_zero_grads(like), 0, hyper};
}

// Single-tensor kernel; `t_after` is the post-increment step index (>= 1).
template <typename T>
void adam_update_tensor(Tensor<T>& w, const Tensor<T>& g, Tensor<T>& m,
                        Tensor<T>& v, std::uint64_t t_after,
                        const AdamHyper& hp) {
  if (!w.same_shape(g) || !w.same_shape(m) || !w.same_shape(v))
    throw DimensionError("adam: parameter/gradient/moment shape mismatch");
  const double b1 = hp.beta1, b2 = hp.beta2;
  const double b1t = 1.0 - std::pow(b1, static_cast<double>(t_after));
  const double b2t = 1.0 - std::pow(b2, static_cast<double>(t_after));
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double gk = static_cast<double>(g[k]);
    const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
    const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
    m[k] = static_cast<T>(mk);
    v[k] = static_cast<T>(vk);
    double step;
    if (hp.form == AdamForm::kPaper) {
      step = hp.alpha * (std::sqrt(b2t) / b1t) * mk /
             (std::sqrt(vk) + hp.epsilon);
    } else {
      step = hp.alpha * (mk / b1t) / (std::sqrt(vk / b2t) + hp.epsilon);
    }
    w[k] = static_cast<T>(static_cast<double>(w[k]) - step);
  }
}

template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads,
               AdamState<T>& state) {
  ++state.t;
  auto ws = net_tensor_list(params);
  auto gs = net_tensor_list(const_cast<NetworkParams<T>&>(grads));
  auto ms = net_tensor_list(state.m);
  auto vs = net_tensor_list(state.v);
  for (std::size_t i = 0; i < ws.size(); ++i)
    adam_update_tensor(*ws[i].second, *gs[i].second, *ms[i].second,
                       *vs[i].second, state.t, state.hyper);
}

}  // namespace capvo
