#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "core.hpp"
#include "rng.hpp"
#include "sensitivity.hpp"

namespace invlab {

enum class ThetaMethod { first_integral, shooting };

/// Noise-optimal mixing angle on a grid, solving
///   (3 + cos 2 Theta) Theta'' = sin 2 Theta (Theta')^2,  Theta(0) = 0, Theta(T) = pi.
struct ThetaSolution {
  TimeGrid grid;
  std::vector<double> theta;
  std::vector<double> theta_dot;
  double c = 0.0;  ///< first-integral constant, Theta' sqrt(3 + cos 2 Theta) = c
  ThetaMethod method = ThetaMethod::first_integral;
  TimeFunction function;  ///< evaluable off-grid

  /// max |(3 + cos 2 Theta) Theta'' - sin 2 Theta (Theta')^2| over interior
  /// points, with Theta'' from fourth-order centered differences of the
  /// sampled Theta'.
  double max_residual() const {
    const double h = grid.step();
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < grid.size(); ++i) {
      const double theta_ddot =
          (-theta_dot[i + 2] + 8.0 * theta_dot[i + 1] - 8.0 * theta_dot[i - 1] + theta_dot[i - 2]) / (12.0 * h);
      const double th = theta[i];
      const double r = (3.0 + std::cos(2.0 * th)) * theta_ddot - std::sin(2.0 * th) * theta_dot[i] * theta_dot[i];
      worst = std::max(worst, std::abs(r));
    }
    return worst;
  }
};

namespace detail {

/// F(theta) = int_0^theta sqrt(3 + cos 2u) du through the cosine series of
/// the integrand, which converges geometrically (the integrand is analytic
/// and pi-periodic).
class SqrtCosineIntegral {
 public:
  SqrtCosineIntegral() {
    constexpr int kNodes = 256;
    constexpr int kMaxTerms = 100;
    std::vector<double> f(kNodes);
    for (int j = 0; j < kNodes; ++j) f[j] = integrand(pi * j / kNodes);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean_ = mean / kNodes;
    int small_run = 0;
    for (int k = 1; k <= kMaxTerms; ++k) {
      double a = 0.0;
      for (int j = 0; j < kNodes; ++j) a += f[j] * std::cos(2.0 * k * pi * j / kNodes);
      a *= 2.0 / kNodes;
      cosine_.push_back(a);
      small_run = std::abs(a) < 1e-15 * mean_ ? small_run + 1 : 0;
      if (small_run == 3) return;
    }
    throw QuadratureError("first integral: cosine series did not converge");
  }

  static double integrand(double u) { return std::sqrt(3.0 + std::cos(2.0 * u)); }

  double operator()(double theta) const {
    double sum = mean_ * theta;
    for (std::size_t k = 0; k < cosine_.size(); ++k) {
      const double freq = 2.0 * static_cast<double>(k + 1);
      sum += cosine_[k] * std::sin(freq * theta) / freq;
    }
    return sum;
  }

  /// F(pi).
  double full() const { return mean_ * pi; }

  /// F^{-1}(target) on [0, pi] by safeguarded Newton (F' >= sqrt 2).
  double inverse(double target) const {
    double lo = 0.0;
    double hi = pi;
    double x = target / mean_;
    for (int it = 0; it < 60; ++it) {
      if (x <= lo || x >= hi) x = 0.5 * (lo + hi);
      const double g = (*this)(x) - target;
      if (g > 0.0) hi = x; else lo = x;
      const double step = g / integrand(x);
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    return std::clamp(x, 0.0, pi);
  }

 private:
  double mean_ = 0.0;
  std::vector<double> cosine_;
};

inline double optimal_theta_rhs(double theta, double theta_dot) {
  return std::sin(2.0 * theta) * theta_dot * theta_dot / (3.0 + std::cos(2.0 * theta));
}

/// Theta(t) - pi t/T is odd and T-periodic, so the solution is stored as a
/// sine series whose coefficients are sampled from the exact inversion.
class OptimalThetaSeries {
 public:
  explicit OptimalThetaSeries(double duration) : duration_(duration) {
    const SqrtCosineIntegral integral;
    c_ = integral.full() / duration;
    constexpr int kNodes = 256;
    constexpr int kMaxTerms = 120;
    std::vector<double> g(kNodes);
    for (int j = 0; j < kNodes; ++j) {
      const double u = static_cast<double>(j) / kNodes;
      g[j] = integral.inverse(integral.full() * u) - pi * u;
    }
    int small_run = 0;
    for (int k = 1; k <= kMaxTerms; ++k) {
      double b = 0.0;
      for (int j = 0; j < kNodes; ++j) b += g[j] * std::sin(2.0 * pi * k * j / kNodes);
      b *= 2.0 / kNodes;
      sine_.push_back(b);
      small_run = std::abs(b) < 1e-15 ? small_run + 1 : 0;
      if (small_run == 3) return;
    }
    throw QuadratureError("optimal theta: sine series did not converge");
  }

  double c() const { return c_; }

  double theta(double t) const {
    const double x = 2.0 * pi * t / duration_;
    double sum = 0.5 * x;
    // sin(kx) by the angle-addition recurrence.
    const double s1 = std::sin(x);
    const double c1 = std::cos(x);
    double sk = s1;
    double ck = c1;
    for (double b : sine_) {
      sum += b * sk;
      const double next_s = sk * c1 + ck * s1;
      ck = ck * c1 - sk * s1;
      sk = next_s;
    }
    return sum;
  }

  double theta_dot(double t) const {
    const double w = 2.0 * pi / duration_;
    const double x = w * t;
    double sum = 0.5 * w;
    const double s1 = std::sin(x);
    const double c1 = std::cos(x);
    double sk = s1;
    double ck = c1;
    double k = 1.0;
    for (double b : sine_) {
      sum += b * k * w * ck;
      const double next_s = sk * c1 + ck * s1;
      ck = ck * c1 - sk * s1;
      sk = next_s;
      k += 1.0;
    }
    return sum;
  }

 private:
  double duration_;
  double c_ = 0.0;
  std::vector<double> sine_;
};

}  // namespace detail

/// First-integral solver. The ODE integrates once to
///   Theta' = c / sqrt(3 + cos 2 Theta),  c = (1/T) int_0^pi sqrt(3 + cos 2u) du,
/// so t(Theta) = F(Theta) / c is inverted (safeguarded Newton, seeded by the
/// linear profile) and then represented as a spectral series in t.
inline ThetaSolution solve_optimal_theta(const TimeGrid& grid) {
  const double duration = grid.duration();
  auto series = std::make_shared<const detail::OptimalThetaSeries>(duration);
  auto theta_of = [series](double t) { return series->theta(t); };
  auto rate_of = [series](double t) { return series->theta_dot(t); };

  ThetaSolution sol{grid, {}, {}, series->c(), ThetaMethod::first_integral,
                    TimeFunction::closed_form(theta_of, rate_of, duration)};
  sol.theta.resize(grid.size());
  sol.theta_dot.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sol.theta[i] = theta_of(grid[i]);
    sol.theta_dot[i] = rate_of(grid[i]);
  }
  sol.theta.front() = 0.0;
  sol.theta.back() = pi;
  return sol;
}

/// Shooting on Theta'(0) with RK4 over the grid and a bracketing root
/// finder. Independent of the first-integral route.
inline ThetaSolution solve_optimal_theta_shooting(const TimeGrid& grid, std::size_t substeps = 8) {
  const double duration = grid.duration();
  const auto integrate = [&](double slope, std::vector<double>* theta, std::vector<double>* theta_dot) {
    double x = 0.0;
    double v = slope;
    if (theta) {
      theta->assign(grid.size(), 0.0);
      theta_dot->assign(grid.size(), 0.0);
      (*theta)[0] = x;
      (*theta_dot)[0] = v;
    }
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double h = (grid[i + 1] - grid[i]) / static_cast<double>(substeps);
      for (std::size_t s = 0; s < substeps; ++s) {
        const double k1x = v;
        const double k1v = detail::optimal_theta_rhs(x, v);
        const double k2x = v + 0.5 * h * k1v;
        const double k2v = detail::optimal_theta_rhs(x + 0.5 * h * k1x, k2x);
        const double k3x = v + 0.5 * h * k2v;
        const double k3v = detail::optimal_theta_rhs(x + 0.5 * h * k2x, k3x);
        const double k4x = v + h * k3v;
        const double k4v = detail::optimal_theta_rhs(x + h * k3x, k4x);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
      }
      if (theta) {
        (*theta)[i + 1] = x;
        (*theta_dot)[i + 1] = v;
      }
    }
    return x;
  };

  // The end angle grows monotonically with the launch slope (time rescaling
  // symmetry of the autonomous ODE), so [pi/(2T), 4 pi/T] brackets the root.
  const auto miss = [&](double slope) { return integrate(slope, nullptr, nullptr) - pi; };
  std::uintmax_t max_iter = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
  double slope;
  try {
    const auto [a, b] =
        boost::math::tools::toms748_solve(miss, 0.5 * pi / duration, 4.0 * pi / duration, tol, max_iter);
    slope = 0.5 * (a + b);
  } catch (const std::exception& e) {
    throw SolverError(std::string("shooting: root bracketing failed: ") + e.what());
  }
  if (max_iter >= 200) throw SolverError("shooting: no convergence");

  ThetaSolution sol{grid, {}, {}, 0.0, ThetaMethod::shooting, TimeFunction()};
  integrate(slope, &sol.theta, &sol.theta_dot);
  sol.theta.back() = pi;
  // Theta' sqrt(3 + cos 2 Theta) at t = 0.
  sol.c = 2.0 * slope;
  sol.function = TimeFunction::sampled(grid, sol.theta);
  return sol;
}

/// m that makes dL/dm vanish:
///   m = Theta' sin 4 alpha sin^2 Theta / (4 cos^2 Theta + 2 sin^2 2 alpha sin^2 Theta).
/// Where the denominator vanishes the alpha = n pi/4 limit m = 0 is used.
inline TimeFunction stationarity_m(const InvariantAngles& angles) {
  const TimeFunction theta = angles.theta();
  const TimeFunction alpha = angles.alpha();
  return TimeFunction::closed_form(
      [theta, alpha](double t) {
        const double th = theta(t);
        const double a = alpha(t);
        const double s2 = std::sin(th) * std::sin(th);
        const double denom = 4.0 * std::cos(th) * std::cos(th) + 2.0 * std::pow(std::sin(2.0 * a), 2) * s2;
        if (denom < 1e-14) return 0.0;
        return theta.derivative(t) * std::sin(4.0 * a) * s2 / denom;
      },
      {}, angles.duration());
}

struct StationarityReport {
  double candidate_qn = 0.0;
  std::vector<double> perturbed_qn;
  double min_margin = 0.0;  ///< min(perturbed) - candidate

  bool locally_minimal(double tolerance = 1e-6) const { return min_margin >= -tolerance; }
};

/// Compares qn_lagrangian of the candidate against Theta perturbations
///   Theta + sum_{k=1..5} a_k sin(k pi t / T),  a_k uniform in [-scale, scale],
/// keeping alpha and m fixed. Boundary values are preserved exactly.
inline StationarityReport verify_stationarity(const InvariantAngles& angles, const TimeGrid& grid,
                                              double perturbation_scale, std::size_t count = 20,
                                              std::uint64_t seed = 20120915) {
  constexpr int kModes = 5;
  const double duration = angles.duration();
  const TimeFunction m = TimeFunction::closed_form([angles](double t) { return angles.m(t); }, {}, duration);
  StationarityReport report;
  report.candidate_qn = qn_lagrangian(angles.with_m(m), grid);
  report.min_margin = std::numeric_limits<double>::infinity();
  const rng::CounterStream stream(seed, 0);
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<double> a(kModes);
    for (int k = 0; k < kModes; k += 2) {
      const auto [u1, u2] = stream.uniform_pair(p * kModes + static_cast<std::size_t>(k));
      a[k] = perturbation_scale * (2.0 * u1 - 1.0);
      if (k + 1 < kModes) a[k + 1] = perturbation_scale * (2.0 * u2 - 1.0);
    }
    const TimeFunction base = angles.theta();
    const TimeFunction perturbed = TimeFunction::closed_form(
        [base, a, duration](double t) {
          double v = base(t);
          for (int k = 0; k < kModes; ++k) v += a[k] * std::sin((k + 1) * pi * t / duration);
          return v;
        },
        [base, a, duration](double t) {
          double v = base.derivative(t);
          for (int k = 0; k < kModes; ++k) v += a[k] * (k + 1) * pi / duration * std::cos((k + 1) * pi * t / duration);
          return v;
        },
        duration);
    const InvariantAngles candidate = InvariantAngles(perturbed, angles.alpha(), angles.gamma()).with_m(m);
    const double q = qn_lagrangian(candidate, grid);
    report.perturbed_qn.push_back(q);
    report.min_margin = std::min(report.min_margin, q - report.candidate_qn);
  }
  return report;
}

}  // namespace invlab
