#include <catch2/catch_amalgamated.hpp>

#include <capvo/lstm.hpp>
#include <capvo/rng.hpp>

#include "fd_check.hpp"

using capvo::LstmCache;
using capvo::LstmParams;
using capvo::LstmState;
using capvo::Rng;
using capvo::Tensor;

namespace {

LstmParams<double> zero_params(std::size_t nx, std::size_t nh) {
  const std::size_t z = nx + nh;
  return {Tensor<double>({nh, z}), Tensor<double>({nh, z}),
          Tensor<double>({nh, z}), Tensor<double>({nh, z}),
          Tensor<double>({nh}),    Tensor<double>({nh}),
          Tensor<double>({nh}),    Tensor<double>({nh})};
}

Tensor<double> random_tensor(const std::vector<std::size_t>& shape, Rng& rng,
                             double scale = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Straight-line evaluation of the five gate equations, written independently
// of the header implementation (explicit loops, no shared helpers).
void reference_step(const LstmParams<double>& p, const Tensor<double>& x,
                    const LstmState<double>& prev, std::vector<double>& h_out,
                    std::vector<double>& c_out) {
  const std::size_t nh = p.b_f.dim(0);
  const std::size_t nx = x.dim(0);
  std::vector<double> z(nx + nh);
  for (std::size_t k = 0; k < nx; ++k) z[k] = x[k];
  for (std::size_t k = 0; k < nh; ++k) z[nx + k] = prev.h[k];
  h_out.assign(nh, 0.0);
  c_out.assign(nh, 0.0);
  for (std::size_t r = 0; r < nh; ++r) {
    double af = p.b_f[r], ai = p.b_i[r], ag = p.b_g[r], ao = p.b_o[r];
    for (std::size_t k = 0; k < z.size(); ++k) {
      af += p.w_f(r, k) * z[k];
      ai += p.w_i(r, k) * z[k];
      ag += p.w_g(r, k) * z[k];
      ao += p.w_o(r, k) * z[k];
    }
    const double f = 1.0 / (1.0 + std::exp(-af));
    const double i = 1.0 / (1.0 + std::exp(-ai));
    const double g = std::tanh(ag);
    const double o = 1.0 / (1.0 + std::exp(-ao));
    const double c = f * prev.c[r] + i * g;
    c_out[r] = c;
    h_out[r] = o * std::tanh(c);
  }
}

}  // namespace

TEST_CASE("lstm all-zero case") {
  auto p = zero_params(2, 3);
  Tensor<double> x({2});
  auto state = capvo::lstm_zero_state<double>(3);
  LstmCache<double> cache;
  auto next = capvo::lstm_step_forward(p, x, state, cache);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(cache.f[k] == 0.5);
    CHECK(cache.i[k] == 0.5);
    CHECK(cache.o[k] == 0.5);
    CHECK(cache.g[k] == 0.0);
    CHECK(next.c[k] == 0.0);
    CHECK(next.h[k] == 0.0);
  }
}

TEST_CASE("lstm scalar forget-gate case") {
  auto p = zero_params(1, 1);
  p.b_f[0] = 10.0;
  Tensor<double> x({1});
  LstmState<double> prev{Tensor<double>({1}), Tensor<double>({1})};
  prev.c[0] = 1.0;
  LstmCache<double> cache;
  auto next = capvo::lstm_step_forward(p, x, prev, cache);
  const double sig10 = 1.0 / (1.0 + std::exp(-10.0));
  CHECK(next.c[0] == Catch::Approx(sig10).epsilon(1e-12));
  CHECK(next.h[0] == Catch::Approx(0.5 * std::tanh(sig10)).epsilon(1e-12));
}

TEST_CASE("lstm step matches independent reference on 1000 random instances") {
  Rng rng(2025);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t nx = 3, nh = 4;
    LstmParams<double> p{
        random_tensor({nh, nx + nh}, rng), random_tensor({nh, nx + nh}, rng),
        random_tensor({nh, nx + nh}, rng), random_tensor({nh, nx + nh}, rng),
        random_tensor({nh}, rng),          random_tensor({nh}, rng),
        random_tensor({nh}, rng),          random_tensor({nh}, rng)};
    auto x = random_tensor({nx}, rng);
    LstmState<double> prev{random_tensor({nh}, rng), random_tensor({nh}, rng)};
    LstmCache<double> cache;
    auto next = capvo::lstm_step_forward(p, x, prev, cache);
    std::vector<double> h_ref, c_ref;
    reference_step(p, x, prev, h_ref, c_ref);
    for (std::size_t k = 0; k < nh; ++k) {
      worst = std::max(worst, std::abs(next.h[k] - h_ref[k]));
      worst = std::max(worst, std::abs(next.c[k] - c_ref[k]));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("lstm hidden output is tanh-sigmoid bounded") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    LstmParams<double> p{
        random_tensor({4, 6}, rng, 3.0), random_tensor({4, 6}, rng, 3.0),
        random_tensor({4, 6}, rng, 3.0), random_tensor({4, 6}, rng, 3.0),
        random_tensor({4}, rng, 3.0),    random_tensor({4}, rng, 3.0),
        random_tensor({4}, rng, 3.0),    random_tensor({4}, rng, 3.0)};
    auto x = random_tensor({2}, rng, 5.0);
    LstmState<double> prev{random_tensor({4}, rng, 0.9),
                           random_tensor({4}, rng, 2.0)};
    for (std::size_t k = 0; k < 4; ++k)
      prev.h[k] = std::clamp(prev.h[k], -1.0, 1.0);
    LstmCache<double> cache;
    auto next = capvo::lstm_step_forward(p, x, prev, cache);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(next.h[k]) <= 1.0);
  }
}

TEST_CASE("lstm init ranges and forget bias") {
  Rng rng(13);
  auto p = capvo::lstm_init<double>(5, 4, rng);
  CHECK(p.input_size() == 5);
  CHECK(p.hidden_size() == 4);
  for (std::size_t k = 0; k < p.w_f.size(); ++k) {
    CHECK(std::abs(p.w_f[k]) <= 0.08);
    CHECK(std::abs(p.w_g[k]) <= 0.08);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(p.b_f[k] == 1.0);
    CHECK(p.b_i[k] == 0.0);
  }
}

TEST_CASE("two-step backward matches finite differences") {
  Rng rng(99);
  const std::size_t nx = 3, nh = 4;
  LstmParams<double> p{
      random_tensor({nh, nx + nh}, rng, 0.4),
      random_tensor({nh, nx + nh}, rng, 0.4),
      random_tensor({nh, nx + nh}, rng, 0.4),
      random_tensor({nh, nx + nh}, rng, 0.4),
      random_tensor({nh}, rng, 0.2), random_tensor({nh}, rng, 0.2),
      random_tensor({nh}, rng, 0.2), random_tensor({nh}, rng, 0.2)};
  auto x0 = random_tensor({nx}, rng);
  auto x1 = random_tensor({nx}, rng);
  auto p0 = random_tensor({nh}, rng);
  auto p1 = random_tensor({nh}, rng);

  // J = p0.h(t=0) + p1.h(t=1), state threaded between the steps
  auto objective = [&]() {
    LstmCache<double> c0, c1;
    auto s0 = capvo::lstm_zero_state<double>(nh);
    auto s1 = capvo::lstm_step_forward(p, x0, s0, c0);
    auto s2 = capvo::lstm_step_forward(p, x1, s1, c1);
    return dot(s1.h, p0) + dot(s2.h, p1);
  };

  LstmCache<double> c0, c1;
  auto s0 = capvo::lstm_zero_state<double>(nh);
  auto s1 = capvo::lstm_step_forward(p, x0, s0, c0);
  auto s2 = capvo::lstm_step_forward(p, x1, s1, c1);
  (void)s2;
  auto grads = capvo::lstm_zero_grads(p);
  Tensor<double> dc_end({nh});
  auto back1 = capvo::lstm_step_backward(p, c1, p1, dc_end, grads);
  Tensor<double> dh0({nh});
  for (std::size_t k = 0; k < nh; ++k) dh0[k] = p0[k] + back1.dprev.h[k];
  auto back0 = capvo::lstm_step_backward(p, c0, dh0, back1.dprev.c, grads);

  CHECK(fdtest::max_grad_err(p.w_f, grads.w_f, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.w_i, grads.w_i, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.w_g, grads.w_g, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.w_o, grads.w_o, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.b_f, grads.b_f, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.b_i, grads.b_i, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.b_g, grads.b_g, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(p.b_o, grads.b_o, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(x0, back0.dx, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(x1, back1.dx, objective) < 1e-4);
}

TEST_CASE("lstm rejects mismatched input size") {
  auto p = zero_params(2, 3);
  Tensor<double> x({5});
  auto state = capvo::lstm_zero_state<double>(3);
  LstmCache<double> cache;
  CHECK_THROWS_AS(capvo::lstm_step_forward(p, x, state, cache),
                  capvo::DimensionError);
}
