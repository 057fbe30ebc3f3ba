#include <catch2/catch_amalgamated.hpp>

#include <capvo/loss.hpp>
#include <capvo/rng.hpp>

#include "fd_check.hpp"

using capvo::Pose;
using capvo::PoseLossConfig;
using capvo::Rng;
using capvo::Tensor;

TEST_CASE("loss is zero at the exact answer") {
  Pose gt;
  gt.t = Eigen::Vector3d(0.1, -0.2, 0.3);
  gt.q = Eigen::Quaterniond(1, 0, 0, 0);
  auto pred = Tensor<double>::from({7}, {0.1, -0.2, 0.3, 1, 0, 0, 0});
  PoseLossConfig cfg;
  auto l = capvo::pose_loss(pred, gt, cfg);
  CHECK(l.total == 0.0);
  for (int i = 0; i < 7; ++i) CHECK(l.grad[i] == 0.0);
}

TEST_CASE("loss hand case: 5 + 2*0.5 = 6") {
  Pose gt;  // identity
  auto pred = Tensor<double>::from({7}, {3, 4, 0, 1.5, 0, 0, 0});
  PoseLossConfig cfg;
  cfg.beta = 2.0;
  auto l = capvo::pose_loss(pred, gt, cfg);
  CHECK(l.trans == Catch::Approx(5.0).epsilon(1e-15));
  CHECK(l.rot == Catch::Approx(0.5).epsilon(1e-15));
  CHECK(l.total == Catch::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("doubling beta adds exactly the rotation norm") {
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    Tensor<double> pred({7});
    for (int k = 0; k < 7; ++k) pred[k] = rng.normal();
    Pose gt;
    gt.t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    gt.q = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(),
                              rng.normal())
               .normalized();
    PoseLossConfig c1, c2;
    c1.beta = 1.0;
    c2.beta = 2.0;
    auto l1 = capvo::pose_loss(pred, gt, c1);
    auto l2 = capvo::pose_loss(pred, gt, c2);
    CHECK(l2.total - l1.total == Catch::Approx(l1.rot).epsilon(1e-12));
  }
}

TEST_CASE("loss is invariant to the ground-truth quaternion sign") {
  Rng rng(22);
  for (int i = 0; i < 50; ++i) {
    Tensor<double> pred({7});
    for (int k = 0; k < 7; ++k) pred[k] = rng.normal();
    Pose gt, gt_neg;
    gt.t = gt_neg.t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(),
                         rng.normal());
    q.normalize();
    gt.q = q;
    gt_neg.q = q;
    gt_neg.q.coeffs() = -gt_neg.q.coeffs();
    PoseLossConfig cfg;
    cfg.beta = 1.7;
    auto a = capvo::pose_loss(pred, gt, cfg);
    auto b = capvo::pose_loss(pred, gt_neg, cfg);
    CHECK(a.total == b.total);
    for (int k = 0; k < 7; ++k) CHECK(a.grad[k] == b.grad[k]);
  }
}

TEST_CASE("loss gradient matches finite differences away from the kink") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<double> pred({7});
    for (int k = 0; k < 7; ++k) pred[k] = rng.normal() * 2.0;
    Pose gt;
    gt.t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    gt.q = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(),
                              rng.normal())
               .normalized();
    PoseLossConfig cfg;
    cfg.beta = 1.3;
    auto base = capvo::pose_loss(pred, gt, cfg);
    // keep clear of the non-differentiable zero-error point and of the
    // alignment-flip boundary
    double dot = 0.0;
    for (int k = 0; k < 4; ++k)
      dot += pred[3 + k] * (k == 0 ? gt.q.w()
                                   : (k == 1 ? gt.q.x()
                                             : (k == 2 ? gt.q.y() : gt.q.z())));
    if (base.trans < 0.05 || base.rot < 0.05 || std::abs(dot) < 0.05) continue;
    auto objective = [&]() { return double(capvo::pose_loss(pred, gt, cfg).total); };
    CHECK(fdtest::max_grad_err(pred, base.grad, objective) < 1e-6);
  }
}

TEST_CASE("loss rejects invalid input") {
  Pose gt;
  Tensor<double> pred({7});
  pred[3] = 1.0;
  PoseLossConfig bad;
  bad.beta = 0.0;
  CHECK_THROWS_AS(capvo::pose_loss(pred, gt, bad), capvo::ConfigError);
  PoseLossConfig cfg;
  pred[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(capvo::pose_loss(pred, gt, cfg), capvo::NumericError);
}

TEST_CASE("aggregate loss weighted sum") {
  PoseLossConfig cfg;
  cfg.loss_weights = {{"a", 1.0}, {"b", 2.0}};
  CHECK(capvo::aggregate_loss({{"a", 2.0}, {"b", 3.0}}, cfg) == 8.0);
  CHECK(capvo::aggregate_loss({{"a", 5.0}}, cfg) == 5.0);
  cfg.loss_weights = {{"a", 0.0}, {"b", 0.0}};
  CHECK(capvo::aggregate_loss({{"a", 2.0}, {"b", 3.0}}, cfg) == 0.0);
}

TEST_CASE("aggregate loss needs a weight per head") {
  PoseLossConfig cfg;
  cfg.loss_weights = {{"a", 1.0}};
  CHECK_THROWS_AS(capvo::aggregate_loss({{"a", 1.0}, {"z", 1.0}}, cfg),
                  capvo::ConfigError);
}
