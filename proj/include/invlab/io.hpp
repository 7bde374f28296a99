#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "dynamics.hpp"
#include "optimal.hpp"
#include "sensitivity.hpp"

namespace invlab::io {

/// Shortest representation that round-trips, '.' decimal separator
/// regardless of locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ValidationError("not a number: '" + text + "'");
  return v;
}

// ---------------------------------------------------------------------------
// ControlField CSV: t,omega_r,omega_i,delta

/// time_scale multiplies t and divides the frequencies (display in physical
/// units for a protocol of duration time_scale).
inline void write_field_csv(std::ostream& out, const ControlField& field, double time_scale = 1.0) {
  out << "t,omega_r,omega_i,delta\n";
  const TimeGrid& grid = field.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Controls c = field.at(grid[i]);
    out << format_double(grid[i] * time_scale) << ',' << format_double(c.omega_r / time_scale) << ','
        << format_double(c.omega_i / time_scale) << ',' << format_double(c.delta / time_scale) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Reads the CSV written by write_field_csv into a sampled field. The time
/// column must be a uniform grid starting at 0.
inline ControlField read_field_csv(std::istream& in, std::string label = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("field CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,omega_r,omega_i,delta") throw ValidationError("field CSV: unexpected header '" + line + "'");
  std::vector<double> t, wr, wi, d;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ValidationError("field CSV: expected 4 columns in '" + line + "'");
    t.push_back(parse_double(cells[0]));
    wr.push_back(parse_double(cells[1]));
    wi.push_back(parse_double(cells[2]));
    d.push_back(parse_double(cells[3]));
  }
  if (t.size() < 2) throw ValidationError("field CSV: need at least two rows");
  const TimeGrid grid(t.size(), t.back());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - grid[i]) > 1e-9 * grid.duration()) {
      throw ValidationError("field CSV: time column is not a uniform grid from 0");
    }
  }
  return ControlField(grid, TimeFunction::sampled(grid, wr), TimeFunction::sampled(grid, wi),
                      TimeFunction::sampled(grid, d), std::move(label));
}

// ---------------------------------------------------------------------------
// Trajectories.

inline void write_trajectory_csv(std::ostream& out, const Trajectory<BlochState>& traj, double time_scale = 1.0) {
  out << "t,r1,r2,r3\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const BlochState& r = traj.states[i];
    out << format_double(traj.grid[i] * time_scale) << ',' << format_double(r.r1) << ',' << format_double(r.r2)
        << ',' << format_double(r.r3) << '\n';
  }
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory<PureState>& traj, double time_scale = 1.0) {
  out << "t,re_c1,im_c1,re_c2,im_c2\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const PureState& s = traj.states[i];
    out << format_double(traj.grid[i] * time_scale) << ',' << format_double(s.c1.real()) << ','
        << format_double(s.c1.imag()) << ',' << format_double(s.c2.real()) << ',' << format_double(s.c2.imag())
        << '\n';
  }
}

inline void write_theta_csv(std::ostream& out, const ThetaSolution& sol, double time_scale = 1.0) {
  out << "t,theta,theta_dot\n";
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    out << format_double(sol.grid[i] * time_scale) << ',' << format_double(sol.theta[i]) << ','
        << format_double(sol.theta_dot[i] / time_scale) << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON documents.

inline nlohmann::ordered_json to_json(const EnsembleResult& r) {
  nlohmann::ordered_json j;
  j["p2_mean"] = r.p2_mean;
  j["p2_stderr"] = r.p2_stderr;
  j["n_traj"] = r.n_traj;
  j["seed"] = r.seed;
  j["dt"] = r.dt;
  return j;
}

/// q_n is divided by time_scale so it reads in physical units of 1/T.
inline nlohmann::ordered_json to_json(const SensitivityReport& r, double time_scale = 1.0) {
  nlohmann::ordered_json j;
  j["protocol_label"] = r.protocol_label;
  j["q_n"] = r.q_n ? nlohmann::ordered_json(*r.q_n / time_scale) : nlohmann::ordered_json(nullptr);
  j["q_s"] = r.q_s ? nlohmann::ordered_json(*r.q_s) : nlohmann::ordered_json(nullptr);
  j["method"] = to_string(r.method);
  j["error_estimate"] = (r.q_n && !r.q_s) ? r.error_estimate / time_scale : r.error_estimate;
  j["grid"] = {{"n_steps", r.n_steps}};
  return j;
}

}  // namespace invlab::io
