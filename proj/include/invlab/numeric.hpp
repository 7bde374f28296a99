#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace invlab::numeric {

/// Composite Simpson rule on uniformly spaced samples.
///
/// An odd number of intervals is handled by closing the last three
/// intervals with Simpson's 3/8 rule, so the rule stays fourth order for any
/// sample count >= 4. Two or three samples fall back to trapezoid / plain
/// Simpson.
template <typename T>
T simpson(std::span<const T> y, double h) {
  const std::size_t n = y.size();
  if (n < 2) {
    throw ValidationError("simpson: need at least two samples");
  }
  if (n == 2) {
    return (y[0] + y[1]) * (h / 2.0);
  }
  const std::size_t intervals = n - 1;
  std::size_t simpson_end = (intervals % 2 == 0) ? intervals : intervals - 3;
  T sum{};
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
    sum += (y[i] + 4.0 * y[i + 1] + y[i + 2]) * (h / 3.0);
  }
  if (simpson_end != intervals) {
    const std::size_t i = simpson_end;
    sum += (y[i] + 3.0 * y[i + 1] + 3.0 * y[i + 2] + y[i + 3]) * (3.0 * h / 8.0);
  }
  return sum;
}

template <typename T>
T simpson(const std::vector<T>& y, double h) {
  return simpson(std::span<const T>(y), h);
}

template <typename T>
struct QuadratureResult {
  T value{};
  double error_estimate = 0.0;
};

/// Simpson plus a Richardson estimate of its error from the rule applied to
/// every other sample.
template <typename T>
QuadratureResult<T> simpson_with_estimate(const std::vector<T>& y, double h) {
  QuadratureResult<T> out;
  out.value = simpson(std::span<const T>(y), h);
  if (y.size() >= 7) {
    std::vector<T> coarse;
    coarse.reserve(y.size() / 2 + 1);
    for (std::size_t i = 0; i < y.size(); i += 2) coarse.push_back(y[i]);
    // Trailing sample is dropped when the count is even; only the
    // magnitude of the difference is used.
    if ((y.size() - 1) % 2 == 0) {
      const T coarse_value = simpson(std::span<const T>(coarse), 2.0 * h);
      out.error_estimate = std::abs(out.value - coarse_value) / 15.0;
    } else {
      const T trap_fine = [&] {
        T s{};
        for (std::size_t i = 0; i + 1 < y.size(); ++i) s += (y[i] + y[i + 1]) * (h / 2.0);
        return s;
      }();
      out.error_estimate = std::abs(out.value - trap_fine);
    }
  }
  return out;
}

/// Centered second-order differences, one-sided second-order at the ends.
inline std::vector<double> differentiate_samples(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 3) {
    throw DifferentiationError("differentiate_samples: need at least three samples");
  }
  std::vector<double> d(n);
  d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
  d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
  for (double v : d) {
    if (!std::isfinite(v)) throw DifferentiationError("differentiate_samples: non-finite derivative");
  }
  return d;
}

/// Same rule applied to a callable on [lo, hi] with a fine step. Points
/// within one step of an end switch to the one-sided stencil.
template <typename F>
double derivative_at(const F& f, double t, double lo, double hi) {
  const double h = 1e-5 * (hi - lo);
  double d;
  if (t - h < lo) {
    d = (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h);
  } else if (t + h > hi) {
    d = (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h);
  } else {
    d = (f(t + h) - f(t - h)) / (2.0 * h);
  }
  if (!std::isfinite(d)) throw DifferentiationError("derivative_at: non-finite derivative");
  return d;
}

}  // namespace invlab::numeric
