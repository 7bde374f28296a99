#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"
#include "optimal.hpp"

namespace invlab {

// ---------------------------------------------------------------------------
// Mixing-angle profiles with Theta(0) = 0, Theta(T) = pi.

inline TimeFunction linear_theta(double duration = 1.0) {
  return TimeFunction::closed_form([duration](double t) { return pi * t / duration; },
                                   [duration](double) { return pi / duration; }, duration);
}

/// pi t/T - sin(2 pi t/T)/12, a close approximation of the noise optimum.
inline TimeFunction approximate_optimal_theta(double duration = 1.0) {
  return TimeFunction::closed_form(
      [duration](double t) { return pi * t / duration - std::sin(2.0 * pi * t / duration) / 12.0; },
      [duration](double t) { return pi / duration - pi / (6.0 * duration) * std::cos(2.0 * pi * t / duration); },
      duration);
}

/// gamma = n (2 Theta - sin 2 Theta); gamma' = 4 n sin^2(Theta) Theta'.
inline TimeFunction zero_systematic_gamma(const TimeFunction& theta, double n) {
  return TimeFunction::closed_form(
      [theta, n](double t) {
        const double th = theta(t);
        return n * (2.0 * th - std::sin(2.0 * th));
      },
      [theta, n](double t) {
        const double s = std::sin(theta(t));
        return 4.0 * n * s * s * theta.derivative(t);
      },
      theta.duration());
}

/// alpha = -arccot(4 n sin^3 Theta) on the branch (-pi, 0), which keeps
/// Omega_I = 0 for the zero-systematic family.
inline TimeFunction zero_omega_i_alpha(const TimeFunction& theta, double n) {
  auto x_of = [theta, n](double t) { return 4.0 * n * std::pow(std::sin(theta(t)), 3); };
  return TimeFunction::closed_form(
      [x_of](double t) {
        const double x = x_of(t);
        if (!std::isfinite(x)) throw GaugeBranchError("zero_omega_i gauge: arccot argument not finite");
        return -std::atan2(1.0, x);
      },
      [theta, n, x_of](double t) {
        const double th = theta(t);
        const double x = x_of(t);
        const double x_dot = 12.0 * n * std::sin(th) * std::sin(th) * std::cos(th) * theta.derivative(t);
        return x_dot / (1.0 + x * x);
      },
      theta.duration());
}

// ---------------------------------------------------------------------------
// Generators.

/// Constant Omega = (pi/T) e^{i alpha}, Delta = 0.
inline ControlField make_flat_pi(double alpha, const TimeGrid& grid) {
  const double amplitude = pi / grid.duration();
  const double d = grid.duration();
  return ControlField(grid, TimeFunction::constant(amplitude * std::cos(alpha), d),
                      TimeFunction::constant(amplitude * std::sin(alpha), d), TimeFunction::constant(0.0, d),
                      "flat_pi");
}

/// Resonant pulse with the given nonnegative envelope rescaled to area pi.
inline ControlField make_shaped_pi(const std::function<double(double)>& envelope, double alpha, const TimeGrid& grid,
                                   std::string label = "shaped_pi") {
  const double duration = grid.duration();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = envelope(grid[i]);
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("make_shaped_pi: envelope must be finite and >= 0");
  }
  double error = 0.0;
  const double area = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(envelope, 0.0, duration, 15,
                                                                                    1e-14, &error);
  if (!(area > 0.0)) throw ValidationError("make_shaped_pi: envelope has zero area");
  const double scale = pi / area;
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  return ControlField(grid, TimeFunction::closed_form([=](double t) { return scale * ca * envelope(t); }, {}, duration),
                      TimeFunction::closed_form([=](double t) { return scale * sa * envelope(t); }, {}, duration),
                      TimeFunction::constant(0.0, duration), std::move(label));
}

/// Omega_R = omega0 sin(pi t/T), Delta = -delta0 cos(pi t/T), Omega_I = 0.
inline ControlField make_sinusoidal(double omega0, double delta0, const TimeGrid& grid) {
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ValidationError("make_sinusoidal: omega0 must be > 0");
  if (!(delta0 >= 0.0) || !std::isfinite(delta0)) throw ValidationError("make_sinusoidal: delta0 must be >= 0");
  const double d = grid.duration();
  const double w = pi / d;
  return ControlField(
      grid,
      TimeFunction::closed_form([=](double t) { return omega0 * std::sin(w * t); },
                                [=](double t) { return omega0 * w * std::cos(w * t); }, d),
      TimeFunction::constant(0.0, d),
      TimeFunction::closed_form([=](double t) { return -delta0 * std::cos(w * t); },
                                [=](double t) { return delta0 * w * std::sin(w * t); }, d),
      "sinusoidal");
}

/// Adds the counter-diabatic term
///   Omega_I = Omega_a = (Omega_R Delta' - Omega_R' Delta) / (Omega_R^2 + Delta^2)
/// to a reference field with Omega_I = 0.
inline ControlField add_counter_diabatic(const ControlField& reference, std::string label = "transitionless") {
  const TimeGrid& grid = reference.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Controls c = reference.at(grid[i]);
    if (c.omega_i != 0.0) throw ValidationError("add_counter_diabatic: reference must have Omega_I = 0");
    if (c.omega_r * c.omega_r + c.delta * c.delta < 1e-12) {
      throw SingularDenominatorError("add_counter_diabatic: Omega_R^2 + Delta^2 vanishes at t = " +
                                     std::to_string(grid[i]));
    }
  }
  const TimeFunction omega_r = reference.omega_r();
  const TimeFunction delta = reference.delta();
  const auto omega_a = [omega_r, delta](double t) {
    const double wr = omega_r(t);
    const double d = delta(t);
    return (wr * delta.derivative(t) - omega_r.derivative(t) * d) / (wr * wr + d * d);
  };
  return ControlField(grid, omega_r, TimeFunction::closed_form(omega_a, {}, grid.duration()), delta,
                      std::move(label));
}

inline ControlField make_transitionless(double omega0, double delta0, const TimeGrid& grid) {
  return add_counter_diabatic(make_sinusoidal(omega0, delta0, grid), "transitionless");
}

/// Inverse engineering from the invariant angles:
///   Omega_R = cos a sin Th g' - sin a Th'
///   Omega_I = sin a sin Th g' + cos a Th'
///   Delta   = -cos Th g' - a'
inline ControlField make_invariant_engineered(const InvariantAngles& angles, const TimeGrid& grid,
                                              std::string label = "invariant_engineered") {
  const TimeFunction theta = angles.theta();
  const TimeFunction alpha = angles.alpha();
  const TimeFunction gamma = angles.gamma();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    const double values[] = {theta(t), alpha(t), gamma(t), theta.derivative(t), alpha.derivative(t),
                             gamma.derivative(t)};
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw DifferentiationError("make_invariant_engineered: angles not finite at t = " + std::to_string(t));
      }
    }
  }
  const double d = grid.duration();
  auto omega_r = [=](double t) {
    const double a = alpha(t);
    return std::cos(a) * std::sin(theta(t)) * gamma.derivative(t) - std::sin(a) * theta.derivative(t);
  };
  auto omega_i = [=](double t) {
    const double a = alpha(t);
    return std::sin(a) * std::sin(theta(t)) * gamma.derivative(t) + std::cos(a) * theta.derivative(t);
  };
  auto delta = [=](double t) { return -std::cos(theta(t)) * gamma.derivative(t) - alpha.derivative(t); };
  return ControlField(grid, TimeFunction::closed_form(omega_r, {}, d), TimeFunction::closed_form(omega_i, {}, d),
                      TimeFunction::closed_form(delta, {}, d), std::move(label));
}

/// Noise-optimal pulse for odd n: Delta = 0,
/// Omega_R = -sin(n pi/4) Theta', Omega_I = cos(n pi/4) Theta'.
inline ControlField make_optimal_noise(int n, const TimeGrid& grid) {
  if (n % 2 == 0) throw ValidationError("make_optimal_noise: n must be odd");
  const ThetaSolution solution = solve_optimal_theta(grid);
  // Theta' samples at the grid, closed form between grid points.
  const TimeFunction theta = solution.function;
  const double sr = -std::sin(n * pi / 4.0);
  const double si = std::cos(n * pi / 4.0);
  const double d = grid.duration();
  return ControlField(grid, TimeFunction::closed_form([=](double t) { return sr * theta.derivative(t); }, {}, d),
                      TimeFunction::closed_form([=](double t) { return si * theta.derivative(t); }, {}, d),
                      TimeFunction::constant(0.0, d), "optimal_noise");
}

enum class Gauge { explicit_alpha, zero_omega_i };

/// Invariant angles of the zero-systematic family gamma = n (2 Theta - sin 2 Theta).
inline InvariantAngles optimal_systematic_angles(int n, const TimeFunction& theta, Gauge gauge,
                                                 const TimeFunction& alpha) {
  if (n < 1) throw ValidationError("optimal_systematic: n must be an integer >= 1");
  const TimeFunction chosen_alpha = gauge == Gauge::zero_omega_i ? zero_omega_i_alpha(theta, n) : alpha;
  return InvariantAngles(theta, chosen_alpha, zero_systematic_gamma(theta, n));
}

/// Zero systematic sensitivity for integer n >= 1. Theta defaults to pi t/T.
inline ControlField make_optimal_systematic(int n, const TimeGrid& grid, Gauge gauge = Gauge::zero_omega_i,
                                            const std::optional<TimeFunction>& theta = std::nullopt,
                                            const TimeFunction& alpha = {}) {
  const TimeFunction th = theta ? *theta : linear_theta(grid.duration());
  return make_invariant_engineered(optimal_systematic_angles(n, th, gauge, alpha), grid, "optimal_systematic");
}

}  // namespace invlab
