#include <catch2/catch_amalgamated.hpp>

#include <capvo/layers.hpp>
#include <capvo/rng.hpp>

#include "fd_check.hpp"

using capvo::Tensor;
using capvo::Rng;

namespace {

Tensor<double> random_tensor(const std::vector<std::size_t>& shape, Rng& rng,
                             double scale = 1.0) {
  Tensor<double> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("conv hand case: diagonal kernel") {
  auto input = Tensor<double>::from({1, 2, 2}, {1, 2, 3, 4});
  auto kernel = Tensor<double>::from({1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor<double> bias({1});
  auto out = capvo::conv2d_forward(input, kernel, bias);
  REQUIRE(out.shape() == std::vector<std::size_t>{1, 1, 1});
  CHECK(out[0] == 5.0);
}

TEST_CASE("conv identity 1x1 kernel reproduces input") {
  Rng rng(1);
  auto input = random_tensor({1, 3, 4}, rng);
  auto kernel = Tensor<double>::from({1, 1, 1, 1}, {1.0});
  Tensor<double> bias({1});
  auto out = capvo::conv2d_forward(input, kernel, bias);
  for (std::size_t i = 0; i < input.size(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv zero padding contributes zeros") {
  auto input = Tensor<double>::from({1, 1, 1}, {5.0});
  Tensor<double> kernel({1, 1, 3, 3}, 1.0);
  Tensor<double> bias({1});
  auto out = capvo::conv2d_forward(input, kernel, bias, 1, 1);
  REQUIRE(out.shape() == std::vector<std::size_t>{1, 1, 1});
  CHECK(out[0] == 5.0);
}

TEST_CASE("conv bias is added per output channel") {
  auto input = Tensor<double>::from({1, 1, 1}, {2.0});
  auto kernel = Tensor<double>::from({2, 1, 1, 1}, {1.0, -1.0});
  auto bias = Tensor<double>::from({2}, {10.0, 20.0});
  auto out = capvo::conv2d_forward(input, kernel, bias);
  CHECK(out[0] == 12.0);
  CHECK(out[1] == 18.0);
}

TEST_CASE("conv rejects bad geometry") {
  Tensor<double> input({1, 4, 4});
  Tensor<double> kernel({1, 1, 3, 3});
  Tensor<double> bias({1});
  CHECK_THROWS_AS(capvo::conv2d_forward(input, kernel, bias, 2),
                  capvo::ConfigError);  // (4-3) not divisible by 2
  Tensor<double> wide({1, 1, 5, 5});
  CHECK_THROWS_AS(capvo::conv2d_forward(input, wide, bias),
                  capvo::ConfigError);
  Tensor<double> mismatched({1, 2, 3, 3});
  CHECK_THROWS_AS(capvo::conv2d_forward(input, mismatched, bias),
                  capvo::DimensionError);
}

TEST_CASE("conv gradients match finite differences") {
  Rng rng(2024);
  auto input = random_tensor({2, 5, 6}, rng);
  auto kernel = random_tensor({3, 2, 3, 3}, rng, 0.5);
  auto bias = random_tensor({3}, rng, 0.1);
  const std::size_t stride = 1, pad = 1;
  auto probe = random_tensor({3, 5, 6}, rng);

  auto objective = [&]() {
    return dot(capvo::conv2d_forward(input, kernel, bias, stride, pad), probe);
  };
  auto grads = capvo::conv2d_backward(input, kernel, probe, stride, pad);

  CHECK(fdtest::max_grad_err(input, grads.input_grad, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(kernel, grads.kernel_grad, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(bias, grads.bias_grad, objective) < 1e-4);
}

TEST_CASE("strided conv gradients match finite differences") {
  Rng rng(77);
  auto input = random_tensor({2, 6, 6}, rng);
  auto kernel = random_tensor({2, 2, 2, 2}, rng, 0.5);
  auto bias = random_tensor({2}, rng, 0.1);
  auto probe = random_tensor({2, 3, 3}, rng);
  auto objective = [&]() {
    return dot(capvo::conv2d_forward(input, kernel, bias, 2, 0), probe);
  };
  auto grads = capvo::conv2d_backward(input, kernel, probe, 2, 0);
  CHECK(fdtest::max_grad_err(input, grads.input_grad, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(kernel, grads.kernel_grad, objective) < 1e-4);
}

TEST_CASE("maxpool hand case") {
  auto input = Tensor<double>::from({1, 2, 2}, {1, 2, 3, 4});
  auto res = capvo::maxpool_forward(input, 2, 2);
  REQUIRE(res.output.shape() == std::vector<std::size_t>{1, 1, 1});
  CHECK(res.output[0] == 4.0);
  CHECK(res.argmax[0] == 3);
}

TEST_CASE("maxpool tie breaks to lowest linear index") {
  Tensor<double> input({1, 2, 2}, 7.0);
  auto res = capvo::maxpool_forward(input, 2, 2);
  CHECK(res.argmax[0] == 0);
}

TEST_CASE("maxpool padding acts as minus infinity") {
  auto input = Tensor<double>::from({1, 1, 1}, {-5.0});
  auto res = capvo::maxpool_forward(input, 3, 1, 1);
  CHECK(res.output[0] == -5.0);
  CHECK(res.argmax[0] == 0);
}

TEST_CASE("maxpool same-size 3x3 window keeps spatial dims") {
  Rng rng(9);
  auto input = random_tensor({2, 4, 4}, rng);
  auto res = capvo::maxpool_forward(input, 3, 1, 1);
  CHECK(res.output.shape() == std::vector<std::size_t>{2, 4, 4});
}

TEST_CASE("maxpool backward routes gradient to winners only") {
  auto input = Tensor<double>::from({1, 2, 2}, {1, 2, 3, 4});
  auto res = capvo::maxpool_forward(input, 2, 2);
  auto probe = Tensor<double>::from({1, 1, 1}, {2.5});
  auto g = capvo::maxpool_backward(res.argmax, probe, input.shape());
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 2.5);
}

TEST_CASE("maxpool input gradient matches finite differences") {
  Rng rng(31);
  auto input = random_tensor({2, 4, 4}, rng);
  auto probe = random_tensor({2, 2, 2}, rng);
  auto objective = [&]() {
    return dot(capvo::maxpool_forward(input, 2, 2).output, probe);
  };
  auto res = capvo::maxpool_forward(input, 2, 2);
  auto grad = capvo::maxpool_backward(res.argmax, probe, input.shape());
  CHECK(fdtest::max_grad_err(input, grad, objective) < 1e-4);
}

TEST_CASE("dense hand case") {
  auto w = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  auto x = Tensor<double>::from({2}, {1, 1});
  Tensor<double> b({2});
  auto y = capvo::dense_forward(x, w, b);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 7.0);
}

TEST_CASE("dense gradients match finite differences") {
  Rng rng(4);
  auto w = random_tensor({4, 6}, rng, 0.5);
  auto x = random_tensor({6}, rng);
  auto b = random_tensor({4}, rng, 0.1);
  auto probe = random_tensor({4}, rng);
  auto objective = [&]() { return dot(capvo::dense_forward(x, w, b), probe); };
  auto g = capvo::dense_backward(x, w, probe);
  CHECK(fdtest::max_grad_err(x, g.input_grad, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(w, g.weight_grad, objective) < 1e-4);
  CHECK(fdtest::max_grad_err(b, g.bias_grad, objective) < 1e-4);
}

TEST_CASE("sigmoid hand values") {
  auto x = Tensor<double>::from({3}, {0.0, std::log(3.0), -std::log(3.0)});
  auto y = capvo::sigmoid_forward(x);
  CHECK(y[0] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(y[1] == Catch::Approx(0.75).epsilon(1e-12));
  CHECK(y[2] == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("sigmoid and tanh gradients match finite differences") {
  Rng rng(5);
  auto x = random_tensor({10}, rng);
  auto probe = random_tensor({10}, rng);
  {
    auto objective = [&]() { return dot(capvo::sigmoid_forward(x), probe); };
    auto y = capvo::sigmoid_forward(x);
    auto g = capvo::sigmoid_backward(y, probe);
    CHECK(fdtest::max_grad_err(x, g, objective) < 1e-4);
  }
  {
    auto objective = [&]() { return dot(capvo::tanh_forward(x), probe); };
    auto y = capvo::tanh_forward(x);
    auto g = capvo::tanh_backward(y, probe);
    CHECK(fdtest::max_grad_err(x, g, objective) < 1e-4);
  }
}

TEST_CASE("channel concat and split round trip") {
  Rng rng(6);
  auto a = random_tensor({2, 3, 3}, rng);
  auto b = random_tensor({1, 3, 3}, rng);
  auto c = random_tensor({3, 3, 3}, rng);
  auto cat = capvo::channel_concat<double>({&a, &b, &c});
  REQUIRE(cat.shape() == std::vector<std::size_t>{6, 3, 3});
  auto parts = capvo::channel_split(cat, {2, 1, 3});
  REQUIRE(parts.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(parts[0][i] == a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(parts[1][i] == b[i]);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(parts[2][i] == c[i]);
}

TEST_CASE("concat rejects mismatched spatial dims") {
  Tensor<double> a({1, 2, 2}), b({1, 3, 2});
  CHECK_THROWS_AS(capvo::channel_concat<double>({&a, &b}),
                  capvo::DimensionError);
}

TEST_CASE("dropout eval mode is identity") {
  Rng rng(8);
  auto x = random_tensor({20}, rng);
  auto res = capvo::dropout_forward(x, 0.5, 123, capvo::DropoutMode::kEval);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(res.output[i] == x[i]);
}

TEST_CASE("dropout train mode zeroes and rescales") {
  Rng rng(9);
  auto x = random_tensor({2000}, rng);
  const double rate = 0.3;
  auto res = capvo::dropout_forward(x, rate, 99, capvo::DropoutMode::kTrain);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (res.mask[i]) {
      ++kept;
      CHECK(res.output[i] == Catch::Approx(x[i] / (1.0 - rate)));
    } else {
      CHECK(res.output[i] == 0.0);
    }
  }
  CHECK(kept > 1200);
  CHECK(kept < 1600);
}

TEST_CASE("dropout is deterministic for a seed") {
  Rng rng(10);
  auto x = random_tensor({100}, rng);
  auto a = capvo::dropout_forward(x, 0.4, 7, capvo::DropoutMode::kTrain);
  auto b = capvo::dropout_forward(x, 0.4, 7, capvo::DropoutMode::kTrain);
  CHECK(a.mask == b.mask);
}

TEST_CASE("dropout gradient matches finite differences with fixed mask") {
  Rng rng(11);
  auto x = random_tensor({30}, rng);
  auto probe = random_tensor({30}, rng);
  const double rate = 0.25;
  const std::uint64_t seed = 555;
  auto objective = [&]() {
    return dot(
        capvo::dropout_forward(x, rate, seed, capvo::DropoutMode::kTrain)
            .output,
        probe);
  };
  auto res = capvo::dropout_forward(x, rate, seed, capvo::DropoutMode::kTrain);
  auto g = capvo::dropout_backward(res.mask, rate, probe,
                                   capvo::DropoutMode::kTrain);
  CHECK(fdtest::max_grad_err(x, g, objective) < 1e-4);
}

TEST_CASE("dropout rejects rate outside [0,1)") {
  Tensor<double> x({2});
  CHECK_THROWS_AS(
      capvo::dropout_forward(x, 1.0, 1, capvo::DropoutMode::kTrain),
      capvo::ConfigError);
  CHECK_THROWS_AS(
      capvo::dropout_forward(x, -0.1, 1, capvo::DropoutMode::kTrain),
      capvo::ConfigError);
}
