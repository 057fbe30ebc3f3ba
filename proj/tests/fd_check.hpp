#pragma once

#include <algorithm>
#include <cmath>

#include <capvo/tensor.hpp>

// Central finite differences for the gradient suites. All checks run in
// double; step 1e-5 keeps truncation and rounding error both near 1e-10.

namespace fdtest {

template <typename F>
double fd_coord(capvo::Tensor<double>& t, std::size_t idx, F&& f,
                double h = 1e-5) {
  const double orig = t[idx];
  t[idx] = orig + h;
  const double fp = f();
  t[idx] = orig - h;
  const double fm = f();
  t[idx] = orig;
  return (fp - fm) / (2.0 * h);
}

// Relative error with an absolute floor: gradients below 1e-2 are compared
// absolutely (tolerance*1e-2), everything else relatively.
inline double rel_err(double fd, double an) {
  const double denom = std::max({std::abs(fd), std::abs(an), 1e-2});
  return std::abs(fd - an) / denom;
}

// Worst rel_err over every coordinate of a tensor.
template <typename F>
double max_grad_err(capvo::Tensor<double>& t,
                    const capvo::Tensor<double>& analytic, F&& f,
                    double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    worst = std::max(worst, rel_err(fd_coord(t, i, f, h), analytic[i]));
  return worst;
}

}  // namespace fdtest
