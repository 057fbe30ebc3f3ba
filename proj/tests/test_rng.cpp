#include <catch2/catch_amalgamated.hpp>

#include <capvo/rng.hpp>

using capvo::Rng;

TEST_CASE("rng determinism") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
}

TEST_CASE("rng uniform01 stays in [0,1)") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("rng uniform range") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform(-2.0, 5.0);
    CHECK(u >= -2.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("rng normal moments") {
  Rng r(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng forks diverge from parent and each other") {
  Rng r(5);
  Rng f1 = r.fork(1), f2 = r.fork(2);
  // identical streams would be an immediate correlation bug
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i)
    differ = f1.uniform01() != f2.uniform01();
  CHECK(differ);
}

TEST_CASE("seed_mix separates close seeds") {
  CHECK(capvo::seed_mix(1, 0) != capvo::seed_mix(0, 1));
  CHECK(capvo::seed_mix(1, 2, 3) != capvo::seed_mix(1, 3, 2));
  CHECK(capvo::seed_mix(0) != 0);
}
