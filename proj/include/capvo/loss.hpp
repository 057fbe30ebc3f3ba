#pragma once

#include <cmath>
#include <map>
#include <string>

#include "capvo/pose.hpp"
#include "capvo/tensor.hpp"

// The beta-balanced pose loss
//   loss = ||x_hat - x||_2 + beta * ||q_hat - q||_2
// over the raw 7-value regressor output (quaternion unnormalized; both the
// prediction and its gradient live in raw output space). Plain norms, not
// squared: the gradient is the unit error vector, with the subgradient at
// zero error defined as 0. The ground-truth quaternion sign is chosen to
// minimize the quaternion error, so q and -q label the same rotation.

namespace capvo {

struct PoseLossConfig {
  double beta = 1.0;
  std::map<std::string, double> loss_weights;  // named heads for aggregation

  void validate() const {
    if (!(beta > 0.0)) throw ConfigError("loss: beta must be positive");
  }
};

template <typename T>
struct PoseLoss {
  T total;
  T trans;  // ||x_hat - x||
  T rot;    // ||q_hat - q||, unweighted by beta
  Tensor<T> grad;  // d total / d pred_raw, shape [7]
};

template <typename T>
PoseLoss<T> pose_loss(const Tensor<T>& pred_raw, const Pose& gt,
                      const PoseLossConfig& cfg) {
  cfg.validate();
  require_shape(pred_raw, {7}, "pose_loss pred");
  pred_raw.require_finite("pose_loss pred");

  double dt[3];
  for (int i = 0; i < 3; ++i)
    dt[i] = static_cast<double>(pred_raw[i]) - gt.t[i];
  const double nt = std::sqrt(dt[0] * dt[0] + dt[1] * dt[1] + dt[2] * dt[2]);

  double gq[4] = {gt.q.w(), gt.q.x(), gt.q.y(), gt.q.z()};
  double dot = 0.0;
  for (int i = 0; i < 4; ++i)
    dot += static_cast<double>(pred_raw[3 + i]) * gq[i];
  if (dot < 0.0)
    for (double& c : gq) c = -c;

  double dq[4];
  for (int i = 0; i < 4; ++i)
    dq[i] = static_cast<double>(pred_raw[3 + i]) - gq[i];
  const double nq =
      std::sqrt(dq[0] * dq[0] + dq[1] * dq[1] + dq[2] * dq[2] + dq[3] * dq[3]);

  PoseLoss<T> out{static_cast<T>(nt + cfg.beta * nq), static_cast<T>(nt),
                  static_cast<T>(nq), Tensor<T>({7})};
  if (nt > 0.0)
    for (int i = 0; i < 3; ++i) out.grad[i] = static_cast<T>(dt[i] / nt);
  if (nq > 0.0)
    for (int i = 0; i < 4; ++i)
      out.grad[3 + i] = static_cast<T>(cfg.beta * dq[i] / nq);
  return out;
}

// Algorithm-2 style aggregation: weighted sum over named heads, iterated in
// name order so the reduction is deterministic.
inline double aggregate_loss(const std::map<std::string, double>& per_head,
                             const PoseLossConfig& cfg) {
  double total = 0.0;
  for (const auto& [name, value] : per_head) {
    auto it = cfg.loss_weights.find(name);
    if (it == cfg.loss_weights.end())
      throw ConfigError("aggregate_loss: no weight for head '" + name + "'");
    total += it->second * value;
  }
  return total;
}

}  // namespace capvo
