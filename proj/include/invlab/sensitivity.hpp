#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "dynamics.hpp"

namespace invlab {

enum class SensitivityMethod { formula, finite_difference, analytic_pi };

inline const char* to_string(SensitivityMethod m) {
  switch (m) {
    case SensitivityMethod::formula: return "formula";
    case SensitivityMethod::finite_difference: return "finite_difference";
    case SensitivityMethod::analytic_pi: return "analytic_pi";
  }
  return "unknown";
}

/// q_n in units of 1/T, q_s dimensionless.
struct SensitivityReport {
  std::string protocol_label;
  std::optional<double> q_n;
  std::optional<double> q_s;
  SensitivityMethod method = SensitivityMethod::formula;
  double error_estimate = 0.0;
  std::size_t n_steps = 0;
};

/// Unperturbed P2(T) below this rejects the perturbative formulas.
inline constexpr double kInversionThreshold = 1.0 - 1e-4;

inline std::vector<double> default_lambda2_samples() {
  std::vector<double> s;
  for (int k = 1; k <= 10; ++k) s.push_back(0.002 * k);
  return s;
}

inline std::vector<double> default_beta_samples() {
  std::vector<double> s;
  for (int k = 1; k <= 5; ++k) {
    s.push_back(-0.01 * k);
    s.push_back(0.01 * k);
  }
  std::sort(s.begin(), s.end());
  return s;
}

namespace detail {

inline void require_inversion(double p2, const std::string& label) {
  if (!(p2 >= kInversionThreshold)) {
    throw PreconditionError("protocol does not invert: '" + label + "' reaches P2(T) = " + std::to_string(p2));
  }
}

struct PolyFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
};

/// Least squares y ~ sum_k c_k x^{powers[k]} (no intercept).
inline PolyFit fit_powers(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& powers) {
  const auto rows = static_cast<Eigen::Index>(x.size());
  const auto cols = static_cast<Eigen::Index>(powers.size());
  // Columns are scaled to unit max so the design stays well conditioned.
  double x_scale = 0.0;
  for (double v : x) x_scale = std::max(x_scale, std::abs(v));
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd b(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) a(i, k) = std::pow(x[i] / x_scale, powers[k]);
    b(i) = y[i];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < cols) throw FitDegeneracyError("sensitivity fit: samples span no range");
  Eigen::VectorXd scaled = qr.solve(b);
  PolyFit fit;
  fit.coefficients.resize(cols);
  fit.standard_errors = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index k = 0; k < cols; ++k) fit.coefficients(k) = scaled(k) / std::pow(x_scale, powers[k]);
  const Eigen::Index dof = rows - cols;
  if (dof > 0) {
    const double rss = (a * scaled - b).squaredNorm();
    const Eigen::MatrixXd cov = (a.transpose() * a).inverse() * (rss / static_cast<double>(dof));
    for (Eigen::Index k = 0; k < cols; ++k) {
      fit.standard_errors(k) = std::sqrt(std::max(0.0, cov(k, k))) / std::pow(x_scale, powers[k]);
    }
  }
  return fit;
}

inline std::size_t distinct_nonzero(const std::vector<double>& v) {
  std::set<double> s;
  for (double x : v) {
    if (x != 0.0) s.insert(x);
  }
  return s.size();
}

/// Curvature estimate with an error bar: the higher-order fit provides the
/// value, its disagreement with the lower-order fit the truncation error.
struct Curvature {
  double value;
  double error;
};

inline Curvature fitted_curvature(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<int>& low, const std::vector<int>& high, int target_power) {
  const auto index_of = [&](const std::vector<int>& powers) {
    return static_cast<Eigen::Index>(std::find(powers.begin(), powers.end(), target_power) - powers.begin());
  };
  const PolyFit low_fit = fit_powers(x, y, low);
  const double low_value = low_fit.coefficients(index_of(low));
  if (distinct_nonzero(x) < high.size()) {
    return {low_value, low_fit.standard_errors(index_of(low))};
  }
  const PolyFit high_fit = fit_powers(x, y, high);
  const double value = high_fit.coefficients(index_of(high));
  return {value, std::abs(value - low_value) + high_fit.standard_errors(index_of(high))};
}

/// Sensitivities are nonnegative; a fitted value below zero is reported as
/// zero with the deficit folded into the error.
inline void clamp_nonnegative(double& value, double& error) {
  if (value < 0.0) {
    error += -value;
    value = 0.0;
  }
}

}  // namespace detail

/// q_N = 1/4 int [Omega_I^2 (r1^2 + r3^2) + Omega_R^2 (r2^2 + r3^2)] dt along
/// the unperturbed Bloch trajectory.
inline SensitivityReport qn_formula(const ControlField& field, const IntegratorOptions& options = {}) {
  const auto traj = evolve_bloch(field, BlochState::ground(), {}, options);
  detail::require_inversion(excitation_probability(traj.final_state()), field.label());
  const TimeGrid& grid = field.grid();
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Controls c = field.at(grid[i]);
    const BlochState& r = traj.states[i];
    integrand[i] = 0.25 * (c.omega_i * c.omega_i * (r.r1 * r.r1 + r.r3 * r.r3) +
                           c.omega_r * c.omega_r * (r.r2 * r.r2 + r.r3 * r.r3));
  }
  const auto quad = numeric::simpson_with_estimate(integrand, grid.step());
  SensitivityReport report;
  report.protocol_label = field.label();
  report.q_n = quad.value;
  report.method = SensitivityMethod::formula;
  report.error_estimate = quad.error_estimate;
  report.n_steps = grid.size();
  return report;
}

/// q_N = 1/4 int Omega_R^2 dt for a resonant real pi pulse.
inline SensitivityReport qn_pi_analytic(const ControlField& field) {
  const TimeGrid& grid = field.grid();
  const auto samples = field.samples();
  double scale = 1.0;
  for (const auto& c : samples) scale = std::max(scale, std::abs(c.omega_r));
  std::vector<double> omega_r(grid.size());
  std::vector<double> omega_r2(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = samples[i];
    if (std::abs(c.omega_i) > 1e-12 * scale || std::abs(c.delta) > 1e-12 * scale) {
      throw PreconditionError("qn_pi_analytic: '" + field.label() + "' is not a resonant real pulse");
    }
    omega_r[i] = c.omega_r;
    omega_r2[i] = 0.25 * c.omega_r * c.omega_r;
  }
  const double area = numeric::simpson(omega_r, grid.step());
  if (std::abs(std::abs(area) - pi) > 1e-6) {
    throw PreconditionError("qn_pi_analytic: '" + field.label() + "' has pulse area " + std::to_string(area));
  }
  const auto quad = numeric::simpson_with_estimate(omega_r2, grid.step());
  SensitivityReport report;
  report.protocol_label = field.label();
  report.q_n = quad.value;
  report.method = SensitivityMethod::analytic_pi;
  report.error_estimate = quad.error_estimate;
  report.n_steps = grid.size();
  return report;
}

/// Fits P2(0) - P2(lambda^2) = q_N x + c2 x^2 (+ c3 x^3) with x = lambda^2.
inline SensitivityReport qn_finite_difference(const ControlField& field,
                                              const std::vector<double>& lambda2_samples = default_lambda2_samples(),
                                              const IntegratorOptions& options = {}) {
  if (lambda2_samples.size() < 3) throw FitDegeneracyError("qn_finite_difference: need at least 3 samples");
  for (double x : lambda2_samples) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("qn_finite_difference: lambda2 samples must be >= 0");
  }
  if (detail::distinct_nonzero(lambda2_samples) < 2) {
    throw FitDegeneracyError("qn_finite_difference: samples span no range");
  }
  const double p0 = final_p2(field, {}, options);
  std::vector<double> y(lambda2_samples.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = p0 - final_p2(field, {0.0, lambda2_samples[i]}, options);
  }
  auto curvature = detail::fitted_curvature(lambda2_samples, y, {1, 2}, {1, 2, 3}, 1);
  double smallest = HUGE_VAL;
  for (double x : lambda2_samples) {
    if (x != 0.0) smallest = std::min(smallest, x);
  }
  if (curvature.value * smallest >= 0.1) {
    throw PreconditionError("qn_finite_difference: smallest sample is outside the quadratic regime");
  }
  detail::clamp_nonnegative(curvature.value, curvature.error);
  SensitivityReport report;
  report.protocol_label = field.label();
  report.q_n = curvature.value;
  report.method = SensitivityMethod::finite_difference;
  report.error_estimate = curvature.error;
  report.n_steps = field.grid().size();
  return report;
}

/// q_S = |int <psi_perp| H1 |psi_0> dt|^2 with psi_0 from the ground state and
/// psi_perp from the excited state, both evolved under H0.
inline SensitivityReport qs_formula(const ControlField& field, const IntegratorOptions& options = {}) {
  const auto psi = evolve_pure(field, PureState::ground(), 0.0, options);
  const auto perp = evolve_pure(field, PureState::excited(), 0.0, options);
  detail::require_inversion(std::norm(psi.final_state().c2), field.label());
  const TimeGrid& grid = field.grid();
  std::vector<complex> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PureState& a = psi.states[i];
    const PureState& b = perp.states[i];
    const complex overlap = std::conj(b.c1) * a.c1 + std::conj(b.c2) * a.c2;
    if (std::abs(overlap) > 1e-7) {
      throw OrthogonalityDriftError("qs_formula: orthogonality drift " + std::to_string(std::abs(overlap)));
    }
    const Controls c = field.at(grid[i]);
    const complex omega(c.omega_r, c.omega_i);
    integrand[i] = 0.5 * (std::conj(b.c1) * std::conj(omega) * a.c2 + std::conj(b.c2) * omega * a.c1);
  }
  const auto quad = numeric::simpson_with_estimate(integrand, grid.step());
  const double amplitude = std::abs(quad.value);
  SensitivityReport report;
  report.protocol_label = field.label();
  report.q_s = amplitude * amplitude;
  report.method = SensitivityMethod::formula;
  report.error_estimate = 2.0 * amplitude * quad.error_estimate + quad.error_estimate * quad.error_estimate;
  report.n_steps = grid.size();
  return report;
}

/// Fits P2(0) - P2(beta) = b1 beta + q_S beta^2 + b3 beta^3 (+ b4 beta^4).
inline SensitivityReport qs_finite_difference(const ControlField& field,
                                              const std::vector<double>& beta_samples = default_beta_samples(),
                                              const IntegratorOptions& options = {}) {
  for (double b : beta_samples) {
    if (!std::isfinite(b)) throw ValidationError("qs_finite_difference: beta samples must be finite");
  }
  if (beta_samples.size() < 3 || detail::distinct_nonzero(beta_samples) < 3) {
    throw FitDegeneracyError("qs_finite_difference: samples span no range");
  }
  const auto p2_at = [&](double beta) {
    return std::norm(evolve_pure(field, PureState::ground(), beta, options).final_state().c2);
  };
  const double p0 = p2_at(0.0);
  std::vector<double> y(beta_samples.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = p0 - p2_at(beta_samples[i]);
  auto curvature = detail::fitted_curvature(beta_samples, y, {1, 2, 3}, {1, 2, 3, 4}, 2);
  double smallest = HUGE_VAL;
  for (double b : beta_samples) {
    if (b != 0.0) smallest = std::min(smallest, b * b);
  }
  if (curvature.value * smallest >= 0.1) {
    throw PreconditionError("qs_finite_difference: smallest sample is outside the quadratic regime");
  }
  detail::clamp_nonnegative(curvature.value, curvature.error);
  SensitivityReport report;
  report.protocol_label = field.label();
  report.q_s = curvature.value;
  report.method = SensitivityMethod::finite_difference;
  report.error_estimate = curvature.error;
  report.n_steps = field.grid().size();
  return report;
}

/// q_S = |int e^{-i gamma} dTheta/dt sin^2(Theta) dt|^2.
inline double qs_invariant(const InvariantAngles& angles, const TimeGrid& grid) {
  std::vector<complex> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    const double s = std::sin(angles.theta()(t));
    integrand[i] = std::polar(angles.theta().derivative(t) * s * s, -angles.gamma()(t));
  }
  return std::norm(numeric::simpson(integrand, grid.step()));
}

/// Integrand of q_N in terms of (m, alpha, Theta, dTheta/dt).
inline double noise_lagrangian(double m, double alpha, double theta, double theta_dot) {
  const double ct2 = std::cos(theta) * std::cos(theta);
  const double st2 = std::sin(theta) * std::sin(theta);
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  const double u = m * sa - ca * theta_dot;
  const double v = m * ca + sa * theta_dot;
  return 0.25 * ((ct2 + ca * ca * st2) * u * u + (ct2 + sa * sa * st2) * v * v);
}

inline double qn_lagrangian(const InvariantAngles& angles, const TimeGrid& grid) {
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    integrand[i] = noise_lagrangian(angles.m(t), angles.alpha()(t), angles.theta()(t), angles.theta().derivative(t));
  }
  return numeric::simpson(integrand, grid.step());
}

}  // namespace invlab
