#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace invlab {

/// Systematic amplitude beta and noise intensity lambda^2 (units of T).
struct ErrorSetting {
  double beta = 0.0;
  double lambda2 = 0.0;

  void validate() const {
    if (!std::isfinite(beta)) throw ValidationError("ErrorSetting: beta must be finite");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) {
      throw ValidationError("ErrorSetting: lambda2 must be finite and >= 0");
    }
  }
};

template <typename State>
struct Trajectory {
  TimeGrid grid;
  std::vector<State> states;

  const State& final_state() const { return states.back(); }
};

struct EnsembleResult {
  double p2_mean = 0.0;
  double p2_stderr = 0.0;
  std::size_t n_traj = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
};

/// Classical RK4 on the grid. Each grid interval is split into substeps when
/// the local error estimate (h |G|)^5 / 120 would exceed local_tolerance;
/// substeps != 0 pins the split instead (used by order tests).
struct IntegratorOptions {
  double local_tolerance = 1e-12;
  std::size_t max_substeps = 4096;
  std::size_t substeps = 0;
};

namespace detail {

/// y' = G(t) y on the grid; generator(t) returns G.
template <typename Vec, typename Generator>
std::vector<Vec> rk4_linear(const TimeGrid& grid, const Vec& y0, Generator generator,
                            const IntegratorOptions& options) {
  const double max_scaled_step = std::pow(120.0 * options.local_tolerance, 0.2);
  std::vector<Vec> out;
  out.reserve(grid.size());
  out.push_back(y0);
  Vec y = y0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t0 = grid[i];
    const double t1 = grid[i + 1];
    const double h = t1 - t0;
    auto g_start = generator(t0);
    std::size_t substeps = options.substeps;
    if (substeps == 0) {
      const double rate = std::max({g_start.norm(), generator(t0 + 0.5 * h).norm(), generator(t1).norm()});
      const double needed = std::ceil(h * rate / max_scaled_step);
      if (!std::isfinite(needed) || needed > static_cast<double>(options.max_substeps)) {
        throw StepSizeError("RK4: local error estimate cannot meet tolerance near t = " + std::to_string(t0));
      }
      substeps = std::max<std::size_t>(1, static_cast<std::size_t>(needed));
    }
    const double hs = h / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
      const double t = t0 + static_cast<double>(s) * hs;
      const auto g0 = (s == 0) ? g_start : generator(t);
      const auto gm = generator(t + 0.5 * hs);
      const auto g1 = generator(s + 1 == substeps ? t1 : t + hs);
      const Vec k1 = g0 * y;
      const Vec k2 = gm * (y + (0.5 * hs) * k1);
      const Vec k3 = gm * (y + (0.5 * hs) * k2);
      const Vec k4 = g1 * (y + hs * k3);
      y += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(y);
  }
  return out;
}

inline Eigen::Matrix2cd schrodinger_generator(const Controls& c, double beta) {
  const double scale = 1.0 + beta;
  const complex omega(scale * c.omega_r, scale * c.omega_i);
  const complex minus_i(0.0, -1.0);
  Eigen::Matrix2cd g;
  g << minus_i * 0.5 * (-c.delta), minus_i * 0.5 * std::conj(omega),
      minus_i * 0.5 * omega, minus_i * 0.5 * c.delta;
  return g;
}

/// L0 + beta L1 - lambda^2 L2.
inline Eigen::Matrix3d bloch_generator(const Controls& c, const ErrorSetting& e) {
  const double scale = 1.0 + e.beta;
  const double wr = scale * c.omega_r;
  const double wi = scale * c.omega_i;
  const double d = c.delta;
  Eigen::Matrix3d g;
  g << 0.0, d, wi,
      -d, 0.0, -wr,
      -wi, wr, 0.0;
  const double r2 = c.omega_r * c.omega_r;
  const double i2 = c.omega_i * c.omega_i;
  g(0, 0) -= 0.5 * e.lambda2 * i2;
  g(1, 1) -= 0.5 * e.lambda2 * r2;
  g(2, 2) -= 0.5 * e.lambda2 * (r2 + i2);
  return g;
}

inline void require_normalized(const PureState& psi, const char* where) {
  if (std::abs(psi.norm_squared() - 1.0) > 1e-6) {
    throw ValidationError(std::string(where) + ": initial state is not normalized");
  }
}

}  // namespace detail

/// i dpsi/dt = (H0 + beta H1) psi with H1 = H0 at Delta = 0.
inline Trajectory<PureState> evolve_pure(const ControlField& field, const PureState& psi0, double beta = 0.0,
                                         const IntegratorOptions& options = {}) {
  detail::require_normalized(psi0, "evolve_pure");
  if (!std::isfinite(beta)) throw ValidationError("evolve_pure: beta must be finite");
  const Eigen::Vector2cd y0(psi0.c1, psi0.c2);
  const auto ys = detail::rk4_linear(
      field.grid(), y0, [&](double t) { return detail::schrodinger_generator(field.at(t), beta); }, options);
  Trajectory<PureState> traj{field.grid(), {}};
  traj.states.reserve(ys.size());
  for (const auto& y : ys) traj.states.push_back({y(0), y(1)});
  return traj;
}

/// dr/dt = (L0 + beta L1 - lambda^2 L2) r, the Bloch form of the master
/// equation with independent amplitude noise on Omega_R and Omega_I.
inline Trajectory<BlochState> evolve_bloch(const ControlField& field, const BlochState& r0,
                                           const ErrorSetting& setting = {},
                                           const IntegratorOptions& options = {}) {
  setting.validate();
  if (r0.norm() > 1.0 + 1e-9) throw ValidationError("evolve_bloch: Bloch vector longer than 1");
  const Eigen::Vector3d y0(r0.r1, r0.r2, r0.r3);
  const auto ys = detail::rk4_linear(
      field.grid(), y0, [&](double t) { return detail::bloch_generator(field.at(t), setting); }, options);
  Trajectory<BlochState> traj{field.grid(), {}};
  traj.states.reserve(ys.size());
  for (const auto& y : ys) traj.states.push_back({y(0), y(1), y(2)});
  return traj;
}

/// P2(T) from the Bloch engine starting in the ground state.
inline double final_p2(const ControlField& field, const ErrorSetting& setting = {},
                       const IntegratorOptions& options = {}) {
  return excitation_probability(evolve_bloch(field, BlochState::ground(), setting, options).final_state());
}

/// Final P2 of a possibly unnormalized state.
inline double normalized_p2(const PureState& psi) { return std::norm(psi.c2) / psi.norm_squared(); }

namespace detail {

/// Controls sampled once at the Euler-Maruyama step times, shared by every
/// trajectory of an ensemble.
struct SsePlan {
  TimeGrid grid;
  std::vector<Controls> controls;
  double dt;
};

inline SsePlan make_sse_plan(const ControlField& field, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("evolve_sse: dt must be positive");
  const double duration = field.grid().duration();
  const double ratio = duration / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * ratio) {
    throw ValidationError("evolve_sse: dt must divide the protocol duration");
  }
  TimeGrid grid(static_cast<std::size_t>(steps) + 1, duration);
  return {grid, field.samples_on(grid), duration / steps};
}

/// One Ito realization; visit(k, psi) sees the state after k steps.
template <typename Visit>
PureState run_sse(const SsePlan& plan, PureState psi, double lambda2, double beta, std::uint64_t seed,
                  std::uint64_t trajectory, Visit&& visit) {
  const rng::CounterStream stream(seed, trajectory);
  const double lambda = std::sqrt(lambda2);
  const double dt = plan.dt;
  const double sqrt_dt = std::sqrt(dt);
  const complex i(0.0, 1.0);
  const double scale = 1.0 + beta;
  visit(0, psi);
  for (std::size_t k = 0; k + 1 < plan.grid.size(); ++k) {
    const Controls& c = plan.controls[k];
    const complex omega(scale * c.omega_r, scale * c.omega_i);
    const complex h1 = 0.5 * (-c.delta * psi.c1 + std::conj(omega) * psi.c2);
    const complex h2 = 0.5 * (omega * psi.c1 + c.delta * psi.c2);
    // H2R^2 + H2I^2 = (Omega_R^2 + Omega_I^2)/4 times identity.
    const double ito = 0.125 * lambda2 * (c.omega_r * c.omega_r + c.omega_i * c.omega_i) * dt;
    PureState next = psi;
    next.c1 += -i * dt * h1 - ito * psi.c1;
    next.c2 += -i * dt * h2 - ito * psi.c2;
    if (lambda2 > 0.0) {
      const auto [z1, z2] = stream.normal_pair(k);
      const double dw_r = z1 * sqrt_dt;
      const double dw_i = z2 * sqrt_dt;
      // H2R psi = (Omega_R/2)(c2, c1); H2I psi = (Omega_I/2)(-i c2, i c1).
      const complex n1 = 0.5 * (c.omega_r * dw_r * psi.c2 - i * c.omega_i * dw_i * psi.c2);
      const complex n2 = 0.5 * (c.omega_r * dw_r * psi.c1 + i * c.omega_i * dw_i * psi.c1);
      next.c1 += -i * lambda * n1;
      next.c2 += -i * lambda * n2;
    }
    psi = next;
    visit(k + 1, psi);
  }
  return psi;
}

}  // namespace detail

/// Euler-Maruyama integration of the Ito stochastic Schrodinger equation
///   dpsi = -i H01 psi dt - (lambda^2/2) (H2R^2 + H2I^2) psi dt
///          - i lambda (H2R dW_R + H2I dW_I) psi.
/// The state is not renormalized; the returned trajectory lives on the grid
/// of step dt.
inline Trajectory<PureState> evolve_sse(const ControlField& field, const PureState& psi0, double lambda2,
                                        double dt, std::uint64_t seed, double beta = 0.0,
                                        std::uint64_t trajectory_index = 0) {
  detail::require_normalized(psi0, "evolve_sse");
  ErrorSetting{beta, lambda2}.validate();
  const auto plan = detail::make_sse_plan(field, dt);
  Trajectory<PureState> traj{plan.grid, std::vector<PureState>(plan.grid.size())};
  detail::run_sse(plan, psi0, lambda2, beta, seed, trajectory_index,
                  [&](std::size_t k, const PureState& psi) { traj.states[k] = psi; });
  return traj;
}

/// Mean and standard error of the final normalized P2 over n_traj
/// trajectories started in the ground state. Trajectory j uses stream j of
/// the seed; the reduction runs in index order.
inline EnsembleResult monte_carlo_p2(const ControlField& field, double lambda2, std::size_t n_traj, double dt,
                                     std::uint64_t seed, double beta = 0.0, unsigned threads = 0) {
  if (n_traj < 2) throw ValidationError("monte_carlo_p2: n_traj must be >= 2");
  ErrorSetting{beta, lambda2}.validate();
  const auto plan = detail::make_sse_plan(field, dt);
  std::vector<double> p2(n_traj);
  parallel_for(
      n_traj,
      [&](std::size_t j) {
        const PureState last =
            detail::run_sse(plan, PureState::ground(), lambda2, beta, seed, j, [](std::size_t, const PureState&) {});
        p2[j] = normalized_p2(last);
      },
      threads);
  // Shifted by the first sample so identical outcomes give exactly zero spread.
  const double shift = p2.front();
  double sum = 0.0;
  for (double v : p2) sum += v - shift;
  const double offset = sum / static_cast<double>(n_traj);
  double ss = 0.0;
  for (double v : p2) ss += (v - shift - offset) * (v - shift - offset);
  const double variance = ss / static_cast<double>(n_traj - 1);
  return {shift + offset, std::sqrt(variance / static_cast<double>(n_traj)), n_traj, seed, plan.dt};
}

}  // namespace invlab
