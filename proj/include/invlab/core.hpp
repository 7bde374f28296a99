#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "errors.hpp"
#include "numeric.hpp"

namespace invlab {

using complex = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

/// Uniform grid on [0, duration]. Time is dimensionless: duration = 1 stands
/// for the protocol time T, and frequencies are in units of 1/T.
class TimeGrid {
 public:
  explicit TimeGrid(std::size_t n_steps = 2001, double duration = 1.0)
      : n_steps_(n_steps), duration_(duration) {
    if (n_steps < 2) throw ValidationError("TimeGrid: n_steps must be >= 2");
    if (!(duration > 0.0) || !std::isfinite(duration)) {
      throw ValidationError("TimeGrid: duration must be positive and finite");
    }
  }

  std::size_t size() const { return n_steps_; }
  double duration() const { return duration_; }
  double step() const { return duration_ / static_cast<double>(n_steps_ - 1); }

  double operator[](std::size_t i) const {
    if (i + 1 == n_steps_) return duration_;
    return static_cast<double>(i) * duration_ / static_cast<double>(n_steps_ - 1);
  }

  std::vector<double> points() const {
    std::vector<double> t(n_steps_);
    for (std::size_t i = 0; i < n_steps_; ++i) t[i] = (*this)[i];
    return t;
  }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::size_t n_steps_;
  double duration_;
};

/// A real function of time on [0, duration]: closed form when one is known,
/// otherwise a cubic spline through grid samples. Derivatives come from the
/// analytic rate if supplied, else from second-order finite differences.
class TimeFunction {
 public:
  using Fn = std::function<double(double)>;

  TimeFunction() : TimeFunction(constant(0.0)) {}

  static TimeFunction constant(double value, double duration = 1.0) {
    return closed_form([value](double) { return value; }, [](double) { return 0.0; }, duration);
  }

  static TimeFunction closed_form(Fn value, Fn rate = {}, double duration = 1.0) {
    if (!value) throw ValidationError("TimeFunction: empty callable");
    auto impl = std::make_shared<Impl>();
    impl->value = std::move(value);
    impl->rate = std::move(rate);
    impl->duration = duration;
    impl->analytic_rate = static_cast<bool>(impl->rate);
    if (!impl->rate) {
      impl->rate = [f = impl->value, duration](double t) {
        return numeric::derivative_at(f, t, 0.0, duration);
      };
    }
    return TimeFunction(std::move(impl));
  }

  static TimeFunction sampled(const TimeGrid& grid, std::vector<double> samples) {
    if (samples.size() != grid.size()) {
      throw ValidationError("TimeFunction: sample count does not match grid");
    }
    auto impl = std::make_shared<Impl>();
    impl->duration = grid.duration();
    impl->samples = samples;
    const double h = grid.step();
    std::vector<double> rates;
    if (samples.size() >= 3) {
      rates = numeric::differentiate_samples(samples, h);
    } else {
      rates.assign(samples.size(), (samples.back() - samples.front()) / grid.duration());
    }
    impl->value = make_interpolant(std::move(samples), h);
    impl->rate = make_interpolant(std::move(rates), h);
    return TimeFunction(std::move(impl));
  }

  double operator()(double t) const { return impl_->value(t); }
  double derivative(double t) const { return impl_->rate(t); }
  double duration() const { return impl_->duration; }
  bool has_analytic_derivative() const { return impl_->analytic_rate; }
  bool is_sampled() const { return !impl_->samples.empty(); }

  std::vector<double> sample(const TimeGrid& grid) const {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = (*this)(grid[i]);
    return out;
  }

 private:
  struct Impl {
    Fn value;
    Fn rate;
    double duration = 1.0;
    bool analytic_rate = false;
    std::vector<double> samples;
  };

  explicit TimeFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  static Fn make_interpolant(std::vector<double> y, double h) {
    if (y.size() >= 5) {
      boost::math::interpolators::cardinal_cubic_b_spline<double> spline(y.data(), y.size(), 0.0, h);
      // Grid nodes return the stored sample exactly.
      return [spline, y = std::move(y), h](double t) {
        const double x = t / h;
        const double node = std::round(x);
        if (std::abs(x - node) < 1e-9 && node >= 0.0 && node < static_cast<double>(y.size())) {
          return y[static_cast<std::size_t>(node)];
        }
        return spline(t);
      };
    }
    // Too few points for the spline's endpoint estimate: piecewise linear.
    return [y = std::move(y), h](double t) {
      const double x = t / h;
      auto i = static_cast<std::ptrdiff_t>(std::floor(x));
      const auto last = static_cast<std::ptrdiff_t>(y.size()) - 1;
      if (i < 0) i = 0;
      if (i >= last) i = last - 1;
      const double w = x - static_cast<double>(i);
      return (1.0 - w) * y[static_cast<std::size_t>(i)] + w * y[static_cast<std::size_t>(i + 1)];
    };
  }

  std::shared_ptr<const Impl> impl_;
};

/// Instantaneous values of the three controls.
struct Controls {
  double omega_r = 0.0;
  double omega_i = 0.0;
  double delta = 0.0;
};

/// The drive of H0 = (1/2) [[-Delta, Omega_R - i Omega_I], [Omega_R + i Omega_I, Delta]]
/// (hbar = 1), on a time grid.
class ControlField {
 public:
  ControlField(TimeGrid grid, TimeFunction omega_r, TimeFunction omega_i, TimeFunction delta,
               std::string label)
      : grid_(grid),
        omega_r_(std::move(omega_r)),
        omega_i_(std::move(omega_i)),
        delta_(std::move(delta)),
        label_(std::move(label)) {
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Controls c = at(grid_[i]);
      if (!std::isfinite(c.omega_r) || !std::isfinite(c.omega_i) || !std::isfinite(c.delta)) {
        throw ValidationError("ControlField '" + label_ + "': non-finite control at t = " +
                              std::to_string(grid_[i]));
      }
    }
  }

  const TimeGrid& grid() const { return grid_; }
  const TimeFunction& omega_r() const { return omega_r_; }
  const TimeFunction& omega_i() const { return omega_i_; }
  const TimeFunction& delta() const { return delta_; }
  const std::string& label() const { return label_; }

  Controls at(double t) const { return {omega_r_(t), omega_i_(t), delta_(t)}; }

  std::vector<Controls> samples() const { return samples_on(grid_); }

  std::vector<Controls> samples_on(const TimeGrid& grid) const {
    std::vector<Controls> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = at(grid[i]);
    return out;
  }

  /// Integral of |Omega| = sqrt(Omega_R^2 + Omega_I^2) over the grid.
  double pulse_area() const {
    std::vector<double> magnitude(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Controls c = at(grid_[i]);
      magnitude[i] = std::hypot(c.omega_r, c.omega_i);
    }
    return numeric::simpson(magnitude, grid_.step());
  }

  ControlField relabeled(std::string label) const {
    ControlField copy = *this;
    copy.label_ = std::move(label);
    return copy;
  }

 private:
  TimeGrid grid_;
  TimeFunction omega_r_;
  TimeFunction omega_i_;
  TimeFunction delta_;
  std::string label_;
};

struct PureState {
  complex c1{1.0, 0.0};
  complex c2{0.0, 0.0};

  double norm_squared() const { return std::norm(c1) + std::norm(c2); }

  static PureState ground() { return {{1.0, 0.0}, {0.0, 0.0}}; }
  static PureState excited() { return {{0.0, 0.0}, {1.0, 0.0}}; }
};

struct BlochState {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 1.0;

  double norm() const { return std::sqrt(r1 * r1 + r2 * r2 + r3 * r3); }

  static BlochState ground() { return {0.0, 0.0, 1.0}; }
};

/// P2 = (1 - r3) / 2.
inline double excitation_probability(const BlochState& state) { return 0.5 * (1.0 - state.r3); }

/// r1 = rho12 + rho21, r2 = i (rho12 - rho21), r3 = rho11 - rho22 with
/// rho12 = c1 conj(c2).
inline BlochState bloch_from_pure(const PureState& state) {
  if (std::abs(state.norm_squared() - 1.0) > 1e-6) {
    throw ValidationError("bloch_from_pure: state is not normalized");
  }
  const complex rho12 = state.c1 * std::conj(state.c2);
  return {2.0 * rho12.real(), -2.0 * rho12.imag(), std::norm(state.c1) - std::norm(state.c2)};
}

/// (Theta, alpha, gamma) parameterization of the pure-state trajectory
///   psi = (cos(Theta/2) e^{-i alpha/2}, sin(Theta/2) e^{i alpha/2}) e^{-i gamma/2}.
///
/// m = tan(Theta) (Delta + d alpha/dt) is derived from the other angles as
/// -sin(Theta) d gamma/dt unless an explicit m is attached with with_m(); the
/// explicit form is what the variational machinery varies independently.
class InvariantAngles {
 public:
  InvariantAngles(TimeFunction theta, TimeFunction alpha, TimeFunction gamma)
      : theta_(std::move(theta)), alpha_(std::move(alpha)), gamma_(std::move(gamma)) {
    const double t_end = theta_.duration();
    if (std::abs(theta_(0.0)) > 1e-9 || std::abs(theta_(t_end) - pi) > 1e-9) {
      throw ValidationError("InvariantAngles: theta must run from 0 to pi");
    }
  }

  InvariantAngles with_m(TimeFunction m) const {
    InvariantAngles copy = *this;
    copy.m_ = std::move(m);
    return copy;
  }

  const TimeFunction& theta() const { return theta_; }
  const TimeFunction& alpha() const { return alpha_; }
  const TimeFunction& gamma() const { return gamma_; }
  double duration() const { return theta_.duration(); }
  bool has_explicit_m() const { return m_.has_value(); }

  double m(double t) const {
    if (m_) return (*m_)(t);
    return -std::sin(theta_(t)) * gamma_.derivative(t);
  }

 private:
  TimeFunction theta_;
  TimeFunction alpha_;
  TimeFunction gamma_;
  std::optional<TimeFunction> m_;
};

}  // namespace invlab
