#pragma once

#include <array>
#include <string>
#include <vector>

#include "capvo/inception.hpp"
#include "capvo/lstm.hpp"
#include "capvo/rng.hpp"
#include "capvo/tensor.hpp"

// The relative-pose regressor: three inception blocks, two stacked LSTMs and
// an affine head emitting 7 raw values (translation + unnormalized
// quaternion) per frame pair. Dropout sits on the flattened convolutional
// features and between the LSTMs. Recurrent state is threaded by the caller
// and reset at trajectory boundaries.

namespace capvo {

struct NetConfig {
  static constexpr std::size_t kInputChannels = 8;  // two stacked RGBD frames
  static constexpr std::size_t kOutputs = 7;

  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::array<std::array<std::size_t, 4>, 3> inception_widths{
      {{8, 8, 8, 8}, {16, 16, 16, 16}, {32, 32, 32, 32}}};
  std::size_t lstm_hidden = 64;
  double dropout_rate = 0.2;
  std::string precision = "float32";

  void validate() const {
    if (input_h == 0 || input_w == 0 || input_h % 8 != 0 || input_w % 8 != 0)
      throw ConfigError("net: input dims must be positive multiples of 8");
    for (const auto& layer : inception_widths)
      for (std::size_t w : layer)
        if (w == 0) throw ConfigError("net: zero inception width");
    if (lstm_hidden == 0) throw ConfigError("net: lstm_hidden must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("net: dropout_rate must be in [0,1)");
    if (precision != "float32" && precision != "float64")
      throw ConfigError("net: precision must be float32 or float64");
  }

  std::size_t final_channels() const {
    const auto& last = inception_widths[2];
    return last[0] + last[1] + last[2] + last[3];
  }

  // Flattened feature length after three stride-2 pools.
  std::size_t feature_size() const {
    return final_channels() * (input_h / 8) * (input_w / 8);
  }
};

inline bool operator==(const NetConfig& a, const NetConfig& b) {
  return a.input_h == b.input_h && a.input_w == b.input_w &&
         a.inception_widths == b.inception_widths &&
         a.lstm_hidden == b.lstm_hidden && a.dropout_rate == b.dropout_rate &&
         a.precision == b.precision;
}

// Holds every trainable tensor. The same struct doubles as the gradient
// accumulator (co-shaped throughout).
template <typename T>
struct NetworkParams {
  std::array<InceptionBlockParams<T>, 3> inception;
  LstmParams<T> lstm1, lstm2;
  Tensor<T> reg_w, reg_b;  // [7, hidden], [7]
};

// Deterministic iteration over all parameter tensors; the visit order defines
// the checkpoint record order and the Adam slot pairing.
template <typename P, typename Fn>
void net_for_each_tensor(P& params, Fn&& fn) {
  inception_for_each_tensor(params.inception[0], "inception1", fn);
  inception_for_each_tensor(params.inception[1], "inception2", fn);
  inception_for_each_tensor(params.inception[2], "inception3", fn);
  for (int l = 0; l < 2; ++l) {
    auto& lstm = (l == 0) ? params.lstm1 : params.lstm2;
    const std::string prefix = (l == 0) ? "lstm1" : "lstm2";
    fn(prefix + ".w_f", lstm.w_f);
    fn(prefix + ".w_i", lstm.w_i);
    fn(prefix + ".w_g", lstm.w_g);
    fn(prefix + ".w_o", lstm.w_o);
    fn(prefix + ".b_f", lstm.b_f);
    fn(prefix + ".b_i", lstm.b_i);
    fn(prefix + ".b_g", lstm.b_g);
    fn(prefix + ".b_o", lstm.b_o);
  }
  fn(std::string("regressor.w"), params.reg_w);
  fn(std::string("regressor.b"), params.reg_b);
}

// Name->tensor pairs in visit order, for code that must walk two or more
// co-shaped parameter sets in lockstep (Adam, checkpoints).
template <typename P>
auto net_tensor_list(P& params) {
  using TensorPtr = decltype(&params.reg_b);
  std::vector<std::pair<std::string, TensorPtr>> out;
  net_for_each_tensor(params, [&out](const std::string& name, auto& t) {
    out.emplace_back(name, &t);
  });
  return out;
}

template <typename T>
NetworkParams<T> net_init(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  NetworkParams<T> p;
  std::size_t channels = NetConfig::kInputChannels;
  for (int b = 0; b < 3; ++b) {
    p.inception[b] =
        inception_init<T>(channels, cfg.inception_widths[b], rng);
    const auto& w = cfg.inception_widths[b];
    channels = w[0] + w[1] + w[2] + w[3];
  }
  const std::size_t feat = cfg.feature_size();
  p.lstm1 = lstm_init<T>(feat, cfg.lstm_hidden, rng);
  p.lstm2 = lstm_init<T>(cfg.lstm_hidden, cfg.lstm_hidden, rng);
  p.reg_w = Tensor<T>({NetConfig::kOutputs, cfg.lstm_hidden});
  p.reg_b = Tensor<T>({NetConfig::kOutputs});
  const double bound =
      std::sqrt(6.0 / static_cast<double>(cfg.lstm_hidden + NetConfig::kOutputs));
  for (std::size_t k = 0; k < p.reg_w.size(); ++k)
    p.reg_w[k] = static_cast<T>(rng.uniform(-bound, bound));
  return p;
}

template <typename T>
NetworkParams<T> net_zero_grads(const NetworkParams<T>& like) {
  NetworkParams<T> g;
  for (int b = 0; b < 3; ++b)
    g.inception[b] = inception_zero_grads(like.inception[b]);
  g.lstm1 = lstm_zero_grads(like.lstm1);
  g.lstm2 = lstm_zero_grads(like.lstm2);
  g.reg_w = Tensor<T>(like.reg_w.shape());
  g.reg_b = Tensor<T>(like.reg_b.shape());
  return g;
}

// Everything backward needs from one timestep's forward pass.
template <typename T>
struct ModelStepCache {
  std::array<InceptionCache<T>, 3> inception;
  std::vector<std::size_t> conv_shape;  // inception-stack output shape
  std::vector<std::uint8_t> drop1_mask, drop2_mask;
  DropoutMode mode = DropoutMode::kEval;
  LstmCache<T> lstm1, lstm2;
  Tensor<T> lstm2_h;  // regressor input
  bool valid = false;
};

// One recurrent step. `state1`/`state2` are updated in place so the caller
// can thread them across a trajectory. `dropout_seed` must vary per step in
// train mode; it is ignored in eval mode.
template <typename T>
Tensor<T> model_forward(const Tensor<T>& pair, const NetworkParams<T>& params,
                        const NetConfig& cfg, LstmState<T>& state1,
                        LstmState<T>& state2, DropoutMode mode,
                        std::uint64_t dropout_seed, ModelStepCache<T>& cache) {
  require_shape(pair, {NetConfig::kInputChannels, cfg.input_h, cfg.input_w},
                "model input");
  pair.require_finite("model input");

  Tensor<T> x = pair;
  for (int b = 0; b < 3; ++b)
    x = inception_forward(x, params.inception[b], cache.inception[b]);
  cache.conv_shape = x.shape();
  Tensor<T> flat = flatten(x);
  if (flat.dim(0) != params.lstm1.input_size())
    throw ConfigError("model: feature size does not match lstm1 input");

  cache.mode = mode;
  auto d1 = dropout_forward(flat, cfg.dropout_rate, seed_mix(dropout_seed, 1),
                            mode);
  cache.drop1_mask = std::move(d1.mask);
  state1 = lstm_step_forward(params.lstm1, d1.output, state1, cache.lstm1);

  auto d2 = dropout_forward(state1.h, cfg.dropout_rate,
                            seed_mix(dropout_seed, 2), mode);
  cache.drop2_mask = std::move(d2.mask);
  state2 = lstm_step_forward(params.lstm2, d2.output, state2, cache.lstm2);

  cache.lstm2_h = state2.h;
  cache.valid = true;
  return dense_forward(cache.lstm2_h, params.reg_w, params.reg_b);
}

// Truncated BPTT over one window. `caches` and `out_grads` are parallel,
// oldest first; gradients are summed over timesteps. Recurrent gradient flows
// within the window only (truncation at both ends).
template <typename T>
NetworkParams<T> model_backward(const NetworkParams<T>& params,
                                const NetConfig& cfg,
                                const std::vector<ModelStepCache<T>>& caches,
                                const std::vector<Tensor<T>>& out_grads) {
  if (caches.size() != out_grads.size())
    throw StateError("model_backward: cache/grad count mismatch");
  if (caches.empty()) throw StateError("model_backward: empty window");
  for (const auto& c : caches)
    if (!c.valid) throw StateError("model_backward: missing forward cache");

  NetworkParams<T> grads = net_zero_grads(params);
  const std::size_t nh = cfg.lstm_hidden;
  Tensor<T> dh1({nh}), dc1({nh}), dh2({nh}), dc2({nh});

  for (std::size_t t = caches.size(); t-- > 0;) {
    const auto& cache = caches[t];
    require_shape(out_grads[t], {NetConfig::kOutputs}, "model out_grad");

    auto dreg = dense_backward(cache.lstm2_h, params.reg_w, out_grads[t]);
    for (std::size_t k = 0; k < grads.reg_w.size(); ++k)
      grads.reg_w[k] += dreg.weight_grad[k];
    for (std::size_t k = 0; k < grads.reg_b.size(); ++k)
      grads.reg_b[k] += dreg.bias_grad[k];
    for (std::size_t k = 0; k < nh; ++k) dh2[k] += dreg.input_grad[k];

    auto g2 = lstm_step_backward(params.lstm2, cache.lstm2, dh2, dc2,
                                 grads.lstm2);
    dh2 = std::move(g2.dprev.h);
    dc2 = std::move(g2.dprev.c);

    Tensor<T> dh1_in = dropout_backward(cache.drop2_mask, cfg.dropout_rate,
                                        g2.dx, cache.mode);
    for (std::size_t k = 0; k < nh; ++k) dh1[k] += dh1_in[k];

    auto g1 = lstm_step_backward(params.lstm1, cache.lstm1, dh1, dc1,
                                 grads.lstm1);
    dh1 = std::move(g1.dprev.h);
    dc1 = std::move(g1.dprev.c);

    Tensor<T> dflat = dropout_backward(cache.drop1_mask, cfg.dropout_rate,
                                       g1.dx, cache.mode);
    Tensor<T> dconv = dflat.reshaped(cache.conv_shape);
    for (int b = 2; b >= 0; --b)
      dconv = inception_backward(params.inception[b], cache.inception[b],
                                 dconv, grads.inception[b]);
  }
  return grads;
}

}  // namespace capvo
