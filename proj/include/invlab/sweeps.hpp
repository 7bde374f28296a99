#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "protocols.hpp"
#include "sensitivity.hpp"

namespace invlab {

struct Axis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::size_t n_points = 2;

  void validate() const {
    if (!(min < max) || !std::isfinite(min) || !std::isfinite(max)) {
      throw ValidationError("axis '" + name + "': need finite min < max");
    }
    if (n_points < 2) throw ValidationError("axis '" + name + "': need at least 2 points");
  }

  double spacing() const { return (max - min) / static_cast<double>(n_points - 1); }

  double operator[](std::size_t i) const {
    return i + 1 == n_points ? max : min + static_cast<double>(i) * spacing();
  }

  std::vector<double> values() const {
    std::vector<double> v(n_points);
    for (std::size_t i = 0; i < n_points; ++i) v[i] = (*this)[i];
    return v;
  }
};

struct GridSpec {
  Axis axis1;
  std::optional<Axis> axis2;

  std::size_t size() const { return axis1.n_points * (axis2 ? axis2->n_points : 1); }

  void validate() const {
    axis1.validate();
    if (axis2) axis2->validate();
  }
};

enum class Quantity { q_n, q_s, p2 };

inline const char* to_string(Quantity q) {
  switch (q) {
    case Quantity::q_n: return "q_n";
    case Quantity::q_s: return "q_s";
    case Quantity::p2: return "p2";
  }
  return "unknown";
}

/// Values are stored axis1-major: index = i1 * n2 + i2. Failed cells are
/// empty.
struct SweepResult {
  GridSpec grid_spec;
  Quantity quantity = Quantity::p2;
  std::string protocol_label;
  std::vector<std::optional<double>> values;

  std::size_t width() const { return grid_spec.axis2 ? grid_spec.axis2->n_points : 1; }

  const std::optional<double>& at(std::size_t i1, std::size_t i2 = 0) const { return values[i1 * width() + i2]; }

  /// Indices of the smallest present value.
  std::pair<std::size_t, std::size_t> argmin() const {
    std::size_t best = values.size();
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (values[k] && (best == values.size() || *values[k] < *values[best])) best = k;
    }
    if (best == values.size()) throw Error("sweep: no cell succeeded");
    return {best / width(), best % width()};
  }
};

// Default ranges: Omega0 T, delta0 T in [0.25, 8] with 32 points; lambda in
// [0, 1.2] T^{-1/2} and beta in [-1, 1] with 61 points.
inline Axis default_omega0_axis() { return {"omega0", 0.25, 8.0, 32}; }
inline Axis default_delta0_axis() { return {"delta0", 0.25, 8.0, 32}; }
inline Axis default_lambda_axis() { return {"lambda", 0.0, 1.2, 61}; }
inline Axis default_beta_axis() { return {"beta", -1.0, 1.0, 61}; }

/// Sinusoidal reference amplitudes of the worked transitionless example.
inline constexpr double kExampleOmega0 = 5.57 / 4.3 * pi;
inline constexpr double kExampleDelta0 = (5.57 / 4.3) * (5.57 / 4.3) * pi;

namespace detail {

template <typename Cell>
SweepResult sweep_2d(const Axis& a1, const Axis& a2, Quantity quantity, std::string label, Cell cell,
                     unsigned threads) {
  SweepResult result{{a1, a2}, quantity, std::move(label), {}};
  result.grid_spec.validate();
  result.values.resize(result.grid_spec.size());
  parallel_for(
      result.values.size(),
      [&](std::size_t k) {
        const double x = a1[k / a2.n_points];
        const double y = a2[k % a2.n_points];
        try {
          const double v = cell(x, y);
          if (std::isfinite(v)) result.values[k] = v;
        } catch (const Error&) {
          // recorded as a missing cell
        }
      },
      threads);
  return result;
}

}  // namespace detail

inline SweepResult sweep_qn_transitionless(const Axis& omega0_axis, const Axis& delta0_axis, const TimeGrid& grid,
                                           unsigned threads = 0) {
  return detail::sweep_2d(
      omega0_axis, delta0_axis, Quantity::q_n, "transitionless",
      [&](double w, double d) { return *qn_formula(make_transitionless(w, d, grid)).q_n; }, threads);
}

inline SweepResult sweep_qs_transitionless(const Axis& omega0_axis, const Axis& delta0_axis, const TimeGrid& grid,
                                           unsigned threads = 0) {
  return detail::sweep_2d(
      omega0_axis, delta0_axis, Quantity::q_s, "transitionless",
      [&](double w, double d) { return *qs_formula(make_transitionless(w, d, grid)).q_s; }, threads);
}

enum class RobustnessVariable { lambda, beta };

/// P2(T) along lambda (Bloch engine, lambda^2 = value^2) or beta (pure-state
/// engine).
inline SweepResult robustness_curve(const ControlField& field, RobustnessVariable variable, const Axis& axis,
                                    unsigned threads = 0) {
  SweepResult result{{axis, std::nullopt}, Quantity::p2, field.label(), {}};
  result.grid_spec.validate();
  result.values.resize(axis.n_points);
  parallel_for(
      axis.n_points,
      [&](std::size_t k) {
        const double x = axis[k];
        if (variable == RobustnessVariable::lambda) {
          result.values[k] = final_p2(field, {0.0, x * x});
        } else {
          result.values[k] = std::norm(evolve_pure(field, PureState::ground(), x).final_state().c2);
        }
      },
      threads);
  return result;
}

/// P2(T) over the (lambda, beta) plane.
inline SweepResult map_p2(const ControlField& field, const Axis& lambda_axis, const Axis& beta_axis,
                          unsigned threads = 0) {
  return detail::sweep_2d(
      lambda_axis, beta_axis, Quantity::p2, field.label(),
      [&](double lambda, double beta) { return final_p2(field, {beta, lambda * lambda}); }, threads);
}

/// Named output of a figure reproduction: file stem plus data.
struct FigurePanel {
  std::string name;
  SweepResult result;
};

/// Data behind figures 1, 2, 4, 5 and 7.
inline std::vector<FigurePanel> figure_data(int figure, const TimeGrid& grid, unsigned threads = 0) {
  const auto optimal_noise = [&] { return make_optimal_noise(7, grid); };
  const auto transitionless = [&] { return make_transitionless(kExampleOmega0, kExampleDelta0, grid); };
  const auto optimal_systematic = [&] { return make_optimal_systematic(1, grid, Gauge::zero_omega_i); };
  std::vector<FigurePanel> panels;
  switch (figure) {
    case 1: {
      const Axis lambda = default_lambda_axis();
      panels.push_back({"fig1_optimal_noise", robustness_curve(optimal_noise(), RobustnessVariable::lambda, lambda, threads)});
      panels.push_back({"fig1_flat_pi", robustness_curve(make_flat_pi(0.0, grid), RobustnessVariable::lambda, lambda, threads)});
      panels.push_back({"fig1_sinusoidal",
                        robustness_curve(make_sinusoidal(kExampleOmega0, kExampleDelta0, grid),
                                         RobustnessVariable::lambda, lambda, threads)});
      panels.push_back({"fig1_transitionless", robustness_curve(transitionless(), RobustnessVariable::lambda, lambda, threads)});
      break;
    }
    case 2:
      panels.push_back({"fig2_qn_transitionless",
                        sweep_qn_transitionless(default_omega0_axis(), default_delta0_axis(), grid, threads)});
      break;
    case 4: {
      const Axis beta = default_beta_axis();
      panels.push_back({"fig4_optimal_systematic", robustness_curve(optimal_systematic(), RobustnessVariable::beta, beta, threads)});
      panels.push_back({"fig4_transitionless", robustness_curve(transitionless(), RobustnessVariable::beta, beta, threads)});
      panels.push_back({"fig4_optimal_noise", robustness_curve(optimal_noise(), RobustnessVariable::beta, beta, threads)});
      break;
    }
    case 5:
      panels.push_back({"fig5_qs_transitionless",
                        sweep_qs_transitionless(default_omega0_axis(), default_delta0_axis(), grid, threads)});
      break;
    case 7: {
      const Axis lambda = default_lambda_axis();
      const Axis beta = default_beta_axis();
      panels.push_back({"fig7_transitionless", map_p2(transitionless(), lambda, beta, threads)});
      panels.push_back({"fig7_optimal_systematic", map_p2(optimal_systematic(), lambda, beta, threads)});
      panels.push_back({"fig7_optimal_noise", map_p2(optimal_noise(), lambda, beta, threads)});
      break;
    }
    default:
      throw ValidationError("unknown figure " + std::to_string(figure) + " (expected 1, 2, 4, 5 or 7)");
  }
  return panels;
}

namespace io {

/// Long-form CSV: axis1,value or axis1,axis2,value; missing cells empty.
inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  const GridSpec& g = r.grid_spec;
  out << g.axis1.name;
  if (g.axis2) out << ',' << g.axis2->name;
  out << ",value\n";
  for (std::size_t i = 0; i < g.axis1.n_points; ++i) {
    for (std::size_t j = 0; j < r.width(); ++j) {
      out << format_double(g.axis1[i]);
      if (g.axis2) out << ',' << format_double((*g.axis2)[j]);
      out << ',';
      if (const auto& v = r.at(i, j)) out << format_double(*v);
      out << '\n';
    }
  }
}

inline nlohmann::ordered_json to_json(const Axis& a) {
  nlohmann::ordered_json j;
  j["name"] = a.name;
  j["min"] = a.min;
  j["max"] = a.max;
  j["n_points"] = a.n_points;
  return j;
}

/// Sidecar metadata for a sweep CSV.
inline nlohmann::ordered_json sidecar_json(const SweepResult& r, const TimeGrid& grid) {
  nlohmann::ordered_json j;
  j["protocol_label"] = r.protocol_label;
  j["quantity"] = to_string(r.quantity);
  nlohmann::ordered_json spec;
  spec["axis1"] = to_json(r.grid_spec.axis1);
  spec["axis2"] = r.grid_spec.axis2 ? to_json(*r.grid_spec.axis2) : nlohmann::ordered_json(nullptr);
  j["grid_spec"] = spec;
  j["grid"] = {{"n_steps", grid.size()}};
  std::size_t missing = 0;
  for (const auto& v : r.values) missing += v ? 0 : 1;
  j["missing_cells"] = missing;
  return j;
}

}  // namespace io

}  // namespace invlab
