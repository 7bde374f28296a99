#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynamics.hpp"
#include "io.hpp"
#include "optimal.hpp"
#include "protocols.hpp"
#include "sensitivity.hpp"
#include "sweeps.hpp"

namespace invlab::cli {

using json = nlohmann::ordered_json;

struct ProtocolConfig {
  std::string kind = "flat_pi";
  double alpha = 0.0;
  double omega0 = kExampleOmega0;
  double delta0 = kExampleDelta0;
  int n = 1;
  std::string envelope = "sine";
  std::string gauge = "zero-omega-i";
  std::string theta = "linear";
};

/// Everything a run needs. Quantities are in units of the protocol duration;
/// output.duration only rescales what is written.
struct RunConfig {
  std::string command;
  ProtocolConfig protocol;
  std::size_t n_steps = 2001;
  double beta = 0.0;
  double lambda2 = 0.0;
  bool monte_carlo = false;
  std::size_t n_traj = 1000;
  double dt = 1.0 / 4000.0;
  std::uint64_t seed = 0;
  std::string method = "formula";
  int figure = 0;
  std::string out_path;
  std::string format;
  double duration = 1.0;
};

inline const std::vector<std::string>& protocol_kinds() {
  static const std::vector<std::string> kinds{"flat_pi",        "shaped_pi",          "sinusoidal_adiabatic",
                                              "transitionless", "invariant_engineered", "optimal_noise",
                                              "optimal_systematic"};
  return kinds;
}

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.count(item.key())) {
      throw ValidationError("config: unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config: key '") + key + "' has the wrong type");
  }
}

inline bool one_of(const std::string& value, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (value == o) return true;
  }
  return false;
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::check_keys(j, "", {"command", "protocol", "grid", "errors", "monte_carlo", "analysis", "output"});
  detail::read_key(j, "command", c.command);
  if (j.contains("protocol")) {
    const json& p = j["protocol"];
    detail::check_keys(p, "protocol", {"kind", "alpha", "omega0", "delta0", "n", "envelope", "gauge", "theta"});
    detail::read_key(p, "kind", c.protocol.kind);
    detail::read_key(p, "alpha", c.protocol.alpha);
    detail::read_key(p, "omega0", c.protocol.omega0);
    detail::read_key(p, "delta0", c.protocol.delta0);
    detail::read_key(p, "n", c.protocol.n);
    detail::read_key(p, "envelope", c.protocol.envelope);
    detail::read_key(p, "gauge", c.protocol.gauge);
    detail::read_key(p, "theta", c.protocol.theta);
  }
  if (j.contains("grid")) {
    detail::check_keys(j["grid"], "grid", {"n_steps"});
    detail::read_key(j["grid"], "n_steps", c.n_steps);
  }
  if (j.contains("errors")) {
    detail::check_keys(j["errors"], "errors", {"beta", "lambda2"});
    detail::read_key(j["errors"], "beta", c.beta);
    detail::read_key(j["errors"], "lambda2", c.lambda2);
  }
  if (j.contains("monte_carlo")) {
    const json& m = j["monte_carlo"];
    detail::check_keys(m, "monte_carlo", {"enabled", "n_traj", "dt", "seed"});
    detail::read_key(m, "enabled", c.monte_carlo);
    detail::read_key(m, "n_traj", c.n_traj);
    detail::read_key(m, "dt", c.dt);
    detail::read_key(m, "seed", c.seed);
  }
  if (j.contains("analysis")) {
    detail::check_keys(j["analysis"], "analysis", {"method", "figure"});
    detail::read_key(j["analysis"], "method", c.method);
    detail::read_key(j["analysis"], "figure", c.figure);
  }
  if (j.contains("output")) {
    detail::check_keys(j["output"], "output", {"path", "format", "duration"});
    detail::read_key(j["output"], "path", c.out_path);
    detail::read_key(j["output"], "format", c.format);
    detail::read_key(j["output"], "duration", c.duration);
  }
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["protocol"] = {{"kind", c.protocol.kind},         {"alpha", c.protocol.alpha}, {"omega0", c.protocol.omega0},
                   {"delta0", c.protocol.delta0},     {"n", c.protocol.n},         {"envelope", c.protocol.envelope},
                   {"gauge", c.protocol.gauge},       {"theta", c.protocol.theta}};
  j["grid"] = {{"n_steps", c.n_steps}};
  j["errors"] = {{"beta", c.beta}, {"lambda2", c.lambda2}};
  j["monte_carlo"] = {{"enabled", c.monte_carlo}, {"n_traj", c.n_traj}, {"dt", c.dt}, {"seed", c.seed}};
  j["analysis"] = {{"method", c.method}, {"figure", c.figure}};
  j["output"] = {{"path", c.out_path}, {"format", c.format}, {"duration", c.duration}};
  return j;
}

/// Checks every field and fills in the default output format.
inline void validate(RunConfig& c) {
  if (!detail::one_of(c.command, {"protocol", "simulate", "sensitivity", "sweep"})) {
    throw ValidationError("a subcommand is required: protocol, simulate, sensitivity or sweep");
  }
  const auto& kinds = protocol_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.protocol.kind) == kinds.end()) {
    throw ValidationError("unknown protocol kind '" + c.protocol.kind + "'");
  }
  if (!std::isfinite(c.protocol.alpha)) throw ValidationError("alpha must be finite");
  if (!detail::one_of(c.protocol.envelope, {"sine", "sine2", "gaussian", "flat"})) {
    throw ValidationError("unknown envelope '" + c.protocol.envelope + "'");
  }
  if (!detail::one_of(c.protocol.gauge, {"zero-omega-i", "explicit"})) {
    throw ValidationError("unknown gauge '" + c.protocol.gauge + "' (zero-omega-i or explicit)");
  }
  if (!detail::one_of(c.protocol.theta, {"linear", "approximate", "optimal"})) {
    throw ValidationError("unknown theta profile '" + c.protocol.theta + "'");
  }
  if (c.n_steps < 3) throw ValidationError("grid.n_steps must be >= 3");
  ErrorSetting{c.beta, c.lambda2}.validate();
  if (c.n_traj < 2) throw ValidationError("monte_carlo.n_traj must be >= 2");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ValidationError("monte_carlo.dt must be > 0");
  if (!detail::one_of(c.method, {"formula", "finite_difference", "analytic_pi", "both"})) {
    throw ValidationError("unknown method '" + c.method + "'");
  }
  if (!(c.duration > 0.0) || !std::isfinite(c.duration)) throw ValidationError("output.duration must be > 0");
  if (c.format.empty()) c.format = c.command == "sensitivity" || (c.command == "simulate" && c.monte_carlo) ? "json" : "csv";
  if (!detail::one_of(c.format, {"csv", "json"})) throw ValidationError("format must be csv or json");
  const std::set<int> figures{1, 2, 4, 5, 7};
  if (c.command == "sweep" && !figures.count(c.figure)) {
    throw ValidationError("sweep needs --figure 1, 2, 4, 5 or 7");
  }
}

inline std::function<double(double)> named_envelope(const std::string& name) {
  if (name == "sine") return [](double t) { return std::sin(pi * t); };
  if (name == "sine2") return [](double t) { return std::pow(std::sin(pi * t), 2); };
  if (name == "gaussian") return [](double t) { return std::exp(-0.5 * std::pow((t - 0.5) / 0.15, 2)); };
  return [](double) { return 1.0; };
}

inline TimeFunction named_theta(const std::string& name, const TimeGrid& grid) {
  if (name == "approximate") return approximate_optimal_theta(grid.duration());
  if (name == "optimal") return solve_optimal_theta(grid).function;
  return linear_theta(grid.duration());
}

inline ControlField build_field(const RunConfig& c) {
  const TimeGrid grid(c.n_steps);
  const ProtocolConfig& p = c.protocol;
  if (p.kind == "flat_pi") return make_flat_pi(p.alpha, grid);
  if (p.kind == "shaped_pi") return make_shaped_pi(named_envelope(p.envelope), p.alpha, grid, "shaped_pi_" + p.envelope);
  if (p.kind == "sinusoidal_adiabatic") return make_sinusoidal(p.omega0, p.delta0, grid);
  if (p.kind == "transitionless") return make_transitionless(p.omega0, p.delta0, grid);
  if (p.kind == "optimal_noise") return make_optimal_noise(p.n, grid);
  const TimeFunction theta = named_theta(p.theta, grid);
  const TimeFunction alpha = TimeFunction::constant(p.alpha, grid.duration());
  if (p.kind == "optimal_systematic") {
    const Gauge gauge = p.gauge == "explicit" ? Gauge::explicit_alpha : Gauge::zero_omega_i;
    return make_optimal_systematic(p.n, grid, gauge, theta, alpha);
  }
  if (p.n < 0) throw ValidationError("invariant_engineered: n must be >= 0");
  return make_invariant_engineered(InvariantAngles(theta, alpha, zero_systematic_gamma(theta, p.n)), grid);
}

namespace detail {

inline std::string json_text(const json& j) { return j.dump(2) + "\n"; }

/// Writes to the configured path, or to `out` when the path is empty or "-".
inline void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty() || c.out_path == "-") {
    out << text;
    return;
  }
  std::ofstream file(c.out_path, std::ios::binary);
  if (!file) throw Error("cannot open '" + c.out_path + "' for writing");
  file << text;
  if (!file) throw Error("failed writing '" + c.out_path + "'");
}

inline json report_json(const SensitivityReport& r, double duration) { return io::to_json(r, duration); }

inline SensitivityReport merge(const SensitivityReport& qn, const SensitivityReport& qs) {
  SensitivityReport r = qn;
  r.q_s = qs.q_s;
  r.error_estimate = std::max(qn.error_estimate, qs.error_estimate);
  return r;
}

/// Rescales a sweep for display at duration T: frequencies and q_n per T,
/// lambda per sqrt(T).
inline SweepResult display_scaled(SweepResult r, double duration) {
  const auto scale_axis = [duration](Axis& a) {
    double f = 1.0;
    if (a.name == "omega0" || a.name == "delta0") f = 1.0 / duration;
    if (a.name == "lambda") f = 1.0 / std::sqrt(duration);
    a.min *= f;
    a.max *= f;
  };
  if (duration == 1.0) return r;
  scale_axis(r.grid_spec.axis1);
  if (r.grid_spec.axis2) scale_axis(*r.grid_spec.axis2);
  if (r.quantity == Quantity::q_n) {
    for (auto& v : r.values) {
      if (v) *v /= duration;
    }
  }
  return r;
}

}  // namespace detail

inline void cmd_protocol(const RunConfig& c, std::ostream& out) {
  const ControlField field = build_field(c);
  std::ostringstream text;
  if (c.format == "csv") {
    io::write_field_csv(text, field, c.duration);
  } else {
    json j;
    j["protocol_label"] = field.label();
    j["pulse_area"] = field.pulse_area();
    j["grid"] = {{"n_steps", field.grid().size()}};
    json rows = json::array();
    for (std::size_t i = 0; i < field.grid().size(); ++i) {
      const Controls k = field.at(field.grid()[i]);
      rows.push_back({field.grid()[i] * c.duration, k.omega_r / c.duration, k.omega_i / c.duration,
                      k.delta / c.duration});
    }
    j["columns"] = {"t", "omega_r", "omega_i", "delta"};
    j["samples"] = rows;
    text << detail::json_text(j);
  }
  detail::emit(c, out, text.str());
}

inline void cmd_simulate(const RunConfig& c, std::ostream& out) {
  const ControlField field = build_field(c);
  std::ostringstream text;
  if (c.monte_carlo) {
    EnsembleResult r = monte_carlo_p2(field, c.lambda2, c.n_traj, c.dt, c.seed, c.beta);
    r.dt *= c.duration;
    if (c.format == "json") {
      text << detail::json_text(io::to_json(r));
    } else {
      text << "p2_mean,p2_stderr,n_traj,seed,dt\n"
           << io::format_double(r.p2_mean) << ',' << io::format_double(r.p2_stderr) << ',' << r.n_traj << ','
           << r.seed << ',' << io::format_double(r.dt) << '\n';
    }
  } else {
    const auto traj = evolve_bloch(field, BlochState::ground(), {c.beta, c.lambda2});
    if (c.format == "csv") {
      io::write_trajectory_csv(text, traj, c.duration);
    } else {
      const BlochState& r = traj.final_state();
      json j;
      j["protocol_label"] = field.label();
      j["beta"] = c.beta;
      j["lambda2"] = c.lambda2 / c.duration;
      j["p2_final"] = excitation_probability(r);
      j["final_state"] = {{"r1", r.r1}, {"r2", r.r2}, {"r3", r.r3}};
      j["grid"] = {{"n_steps", traj.grid.size()}};
      text << detail::json_text(j);
    }
  }
  detail::emit(c, out, text.str());
}

inline std::vector<SensitivityReport> sensitivity_reports(const RunConfig& c) {
  const ControlField field = build_field(c);
  std::vector<SensitivityReport> reports;
  if (c.method == "formula" || c.method == "both") {
    reports.push_back(detail::merge(qn_formula(field), qs_formula(field)));
  }
  if (c.method == "finite_difference" || c.method == "both") {
    reports.push_back(detail::merge(qn_finite_difference(field), qs_finite_difference(field)));
  }
  if (c.method == "analytic_pi") reports.push_back(qn_pi_analytic(field));
  return reports;
}

inline void cmd_sensitivity(const RunConfig& c, std::ostream& out) {
  const auto reports = sensitivity_reports(c);
  std::ostringstream text;
  if (c.format == "json") {
    if (reports.size() == 1) {
      text << detail::json_text(detail::report_json(reports.front(), c.duration));
    } else {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(detail::report_json(r, c.duration));
      text << detail::json_text(arr);
    }
  } else {
    text << "protocol_label,q_n,q_s,method,error_estimate,n_steps\n";
    for (const auto& r : reports) {
      const json j = detail::report_json(r, c.duration);
      text << r.protocol_label << ',' << (r.q_n ? io::format_double(j["q_n"].get<double>()) : "") << ','
           << (r.q_s ? io::format_double(*r.q_s) : "") << ',' << to_string(r.method) << ','
           << io::format_double(j["error_estimate"].get<double>()) << ',' << r.n_steps << '\n';
    }
  }
  detail::emit(c, out, text.str());
}

/// Output naming: a directory (existing, or ending in '/') receives
/// <panel>.csv and <panel>.json; anything else is used as a file prefix.
inline std::string sweep_path(const std::string& out, const std::string& panel, const std::string& ext) {
  namespace fs = std::filesystem;
  if (out.empty() || out == "-") return panel + ext;
  if (out.back() == '/' || fs::is_directory(out)) return (fs::path(out) / (panel + ext)).string();
  return out + "_" + panel + ext;
}

inline void cmd_sweep(const RunConfig& c, std::ostream& out) {
  const TimeGrid grid(c.n_steps);
  if (!c.out_path.empty() && c.out_path.back() == '/') std::filesystem::create_directories(c.out_path);
  for (const FigurePanel& panel : figure_data(c.figure, grid)) {
    const SweepResult shown = detail::display_scaled(panel.result, c.duration);
    json sidecar = io::sidecar_json(shown, grid);
    sidecar["figure"] = c.figure;
    sidecar["duration"] = c.duration;
    std::ostringstream data;
    if (c.format == "csv") {
      io::write_sweep_csv(data, shown);
    } else {
      json values = json::array();
      for (const auto& v : shown.values) values.push_back(v ? json(*v) : json(nullptr));
      sidecar["values"] = values;
    }
    const std::string json_path = sweep_path(c.out_path, panel.name, ".json");
    const std::vector<std::pair<std::string, std::string>> files =
        c.format == "csv" ? std::vector<std::pair<std::string, std::string>>{{sweep_path(c.out_path, panel.name, ".csv"),
                                                                               data.str()},
                                                                              {json_path, detail::json_text(sidecar)}}
                          : std::vector<std::pair<std::string, std::string>>{{json_path, detail::json_text(sidecar)}};
    for (const auto& [path, text] : files) {
      std::ofstream file(path, std::ios::binary);
      if (!file) throw Error("cannot open '" + path + "' for writing");
      file << text;
      if (!file) throw Error("failed writing '" + path + "'");
      out << path << '\n';
    }
  }
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for invalid input, 1 for failures during the run.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Population-inversion protocol design and robustness analysis", "invlab"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  bool dump_config = false;
  std::optional<std::size_t> grid_steps, n_traj;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path, format, kind, envelope, gauge, theta, method;
  std::optional<double> duration, alpha, omega0, delta0, beta, lambda2, dt;
  std::optional<int> n, figure;
  bool sse = false;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_flag("--dump-config", dump_config, "Print the effective configuration and exit");
  app.add_option("--grid-steps", grid_steps, "Number of time-grid points");
  app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--out", out_path, "Output file (sweep: directory or prefix)");
  app.add_option("--format", format, "csv or json");
  app.add_option("--duration", duration, "Protocol duration T used to scale the output");

  auto* protocol = app.add_subcommand("protocol", "Write the control field of a protocol");
  auto* simulate = app.add_subcommand("simulate", "Evolve a protocol under systematic error and noise");
  auto* sensitivity = app.add_subcommand("sensitivity", "Noise and systematic sensitivities of a protocol");
  auto* sweep = app.add_subcommand("sweep", "Reproduce the data of a figure");
  for (auto* sub : {protocol, simulate, sensitivity}) {
    sub->add_option("--kind", kind, "Protocol family");
    sub->add_option("--alpha", alpha, "Phase alpha (radians)");
    sub->add_option("--omega0", omega0, "Sinusoidal Rabi amplitude (1/T)");
    sub->add_option("--delta0", delta0, "Sinusoidal detuning amplitude (1/T)");
    sub->add_option("--n", n, "Integer family index");
    sub->add_option("--envelope", envelope, "shaped_pi envelope: sine, sine2, gaussian, flat");
    sub->add_option("--gauge", gauge, "optimal_systematic gauge: zero-omega-i or explicit");
    sub->add_option("--theta", theta, "Theta profile: linear, approximate, optimal");
  }
  simulate->add_option("--beta", beta, "Systematic error amplitude");
  simulate->add_option("--lambda2", lambda2, "Noise intensity lambda^2 (1/T)");
  simulate->add_flag("--sse", sse, "Monte Carlo over stochastic trajectories");
  simulate->add_option("--n-traj", n_traj, "Number of trajectories");
  simulate->add_option("--dt", dt, "Euler-Maruyama step (T)");
  sensitivity->add_option("--method", method, "formula, finite_difference, analytic_pi or both");
  sweep->add_option("--figure", figure, "Figure number: 1, 2, 4, 5 or 7");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig c;
    if (!config_path.empty()) {
      std::ifstream file(config_path);
      if (!file) throw ValidationError("cannot read config '" + config_path + "'");
      json j;
      try {
        j = json::parse(file);
      } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
      }
      c = config_from_json(j);
    }
    for (auto* sub : {protocol, simulate, sensitivity, sweep}) {
      if (sub->parsed()) c.command = sub->get_name();
    }
    if (grid_steps) c.n_steps = *grid_steps;
    if (seed) c.seed = *seed;
    if (out_path) c.out_path = *out_path;
    if (format) c.format = *format;
    if (duration) c.duration = *duration;
    if (kind) c.protocol.kind = *kind;
    if (alpha) c.protocol.alpha = *alpha;
    if (omega0) c.protocol.omega0 = *omega0;
    if (delta0) c.protocol.delta0 = *delta0;
    if (n) c.protocol.n = *n;
    if (envelope) c.protocol.envelope = *envelope;
    if (gauge) c.protocol.gauge = *gauge;
    if (theta) c.protocol.theta = *theta;
    if (beta) c.beta = *beta;
    if (lambda2) c.lambda2 = *lambda2;
    if (sse) c.monte_carlo = true;
    if (n_traj) c.n_traj = *n_traj;
    if (dt) c.dt = *dt;
    if (method) c.method = *method;
    if (figure) c.figure = *figure;
    validate(c);

    if (dump_config) {
      out << detail::json_text(config_to_json(c));
      return 0;
    }
    if (c.command == "protocol") cmd_protocol(c, out);
    if (c.command == "simulate") cmd_simulate(c, out);
    if (c.command == "sensitivity") cmd_sensitivity(c, out);
    if (c.command == "sweep") cmd_sweep(c, out);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"invlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace invlab::cli
