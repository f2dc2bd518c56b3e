/*
 Copyright 2025 The payload-mpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "payload_mpc/eval.hpp"

namespace payload_mpc {

/// Floats in CSV files carry 9 significant digits.
inline std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  return f;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_double_cell(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("malformed number '" + s + "' in " + where);
  }
}

}  // namespace detail

/// Sparse waypoint file: header `t,x,y,z`, one row per waypoint.
inline void write_reference_csv(std::ostream& os, const SparseReference& ref) {
  os << "t,x,y,z\n";
  for (size_t i = 0; i < ref.times.size(); ++i) {
    os << fmt9(ref.times[i]) << ',' << fmt9(ref.positions[i](0)) << ','
       << fmt9(ref.positions[i](1)) << ',' << fmt9(ref.positions[i](2)) << '\n';
  }
}

inline void write_reference_csv(const std::string& path, const SparseReference& ref) {
  auto f = detail::open_out(path);
  write_reference_csv(f, ref);
}

inline SparseReference read_reference_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open reference file: " + path);
  std::string line;
  // Leading '#' lines are file-level commentary; the header must follow.
  do {
    if (!std::getline(f, line)) throw ConfigError("empty reference file: " + path);
  } while (!line.empty() && line.front() == '#');
  {
    std::string header = line;
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](unsigned char c) { return std::isspace(c); }),
                 header.end());
    if (header != "t,x,y,z")
      throw ConfigError("reference file " + path + ": expected header 't,x,y,z', got '" +
                        line + "'");
  }
  SparseReference ref;
  size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_row(line);
    if (cells.size() != 4)
      throw ConfigError("reference file " + path + ": row " + std::to_string(row) +
                        " has " + std::to_string(cells.size()) + " columns, expected 4");
    const std::string where = path + " row " + std::to_string(row);
    ref.times.push_back(detail::parse_double_cell(cells[0], where));
    ref.positions.emplace_back(detail::parse_double_cell(cells[1], where),
                               detail::parse_double_cell(cells[2], where),
                               detail::parse_double_cell(cells[3], where));
  }
  ref.validate();
  return ref;
}

/// Dense plan file: stage grid positions and inputs.
inline void write_plan_csv(std::ostream& os, const DenseReference& plan) {
  os << "t,x,y,z,u_th,u_phi,u_F\n";
  for (size_t i = 0; i < plan.positions.size(); ++i) {
    const double t = plan.start_time + plan.dt * static_cast<double>(i);
    os << fmt9(t);
    for (int c = 0; c < 3; ++c) os << ',' << fmt9(plan.positions[i](c));
    for (int c = 0; c < 3; ++c) os << ',' << fmt9(plan.inputs[i](c));
    os << '\n';
  }
}

inline void write_plan_csv(const std::string& path, const DenseReference& plan) {
  auto f = detail::open_out(path);
  write_plan_csv(f, plan);
}

/// Closed-loop run log, one row per control tick.
inline void write_run_log_csv(std::ostream& os, const RunLog& log) {
  os << "t,x,y,z,th_l,phi_l,xd,yd,zd,thd_l,phid_l,th,phi,F,"
        "sl_x,sl_y,sl_z,"
        "est_x,est_y,est_z,est_th_l,est_phi_l,est_xd,est_yd,est_zd,"
        "est_thd_l,est_phid_l,est_th,est_phi,est_F,"
        "u_th,u_phi,u_F,"
        "meas_x,meas_y,meas_z,meas_th,meas_phi\n";
  for (const TickRecord& r : log.ticks) {
    os << fmt9(r.t);
    for (int i = 0; i < kStateDim; ++i) os << ',' << fmt9(r.x_true(i));
    for (int i = 0; i < 3; ++i) os << ',' << fmt9(r.payload_true(i));
    for (int i = 0; i < kStateDim; ++i) os << ',' << fmt9(r.estimate(i));
    for (int i = 0; i < kInputDim; ++i) os << ',' << fmt9(r.command(i));
    for (int i = 0; i < kMeasDim; ++i) os << ',' << fmt9(r.measurement(i));
    os << '\n';
  }
}

inline void write_run_log_csv(const std::string& path, const RunLog& log) {
  auto f = detail::open_out(path);
  write_run_log_csv(f, log);
}

/// One CSV row per evaluated scenario.
inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& reports) {
  os << "name,ok,error,payload_mass,cable_length,waypoint_dt,"
        "rmse_open_loop,rmse_executed,delta_rmse_percent,"
        "est_rmse_theta,est_rmse_phi,est_rmse_theta_rate,est_rmse_phi_rate,"
        "est_bias_theta,est_bias_phi,est_std_theta,est_std_phi\n";
  for (const MetricsReport& r : reports) {
    os << detail::csv_quote(r.name) << ',' << (r.ok ? 1 : 0) << ','
       << detail::csv_quote(r.error) << ',' << fmt9(r.payload_mass) << ','
       << fmt9(r.cable_length) << ',' << fmt9(r.waypoint_dt) << ','
       << fmt9(r.rmse_open_loop) << ',' << fmt9(r.rmse_executed) << ','
       << fmt9(r.delta_percent) << ',' << fmt9(r.estimation.rmse_theta) << ','
       << fmt9(r.estimation.rmse_phi) << ',' << fmt9(r.estimation.rmse_theta_rate) << ','
       << fmt9(r.estimation.rmse_phi_rate) << ',' << fmt9(r.estimation.bias_theta) << ','
       << fmt9(r.estimation.bias_phi) << ',' << fmt9(r.estimation.std_theta) << ','
       << fmt9(r.estimation.std_phi) << '\n';
  }
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
  auto f = detail::open_out(path);
  write_metrics_csv(f, reports);
}

/// Human-readable report.
inline std::string format_metrics_text(const MetricsReport& r) {
  std::ostringstream os;
  os << "scenario: " << r.name << '\n';
  if (!r.ok) {
    os << "status: failed (" << r.error << ")\n";
    return os.str();
  }
  os << "status: ok\n"
     << "payload_mass: " << fmt9(r.payload_mass) << " kg, cable_length: "
     << fmt9(r.cable_length) << " m, waypoint_dt: " << fmt9(r.waypoint_dt) << " s\n"
     << "rmse_open_loop: " << fmt9(r.rmse_open_loop) << " m\n"
     << "rmse_executed: " << fmt9(r.rmse_executed) << " m\n"
     << "delta_rmse: " << fmt9(r.delta_percent) << " %\n"
     << "estimation rmse (theta, phi): " << fmt9(r.estimation.rmse_theta) << ", "
     << fmt9(r.estimation.rmse_phi) << " rad\n"
     << "estimation rmse rates (theta, phi): " << fmt9(r.estimation.rmse_theta_rate) << ", "
     << fmt9(r.estimation.rmse_phi_rate) << " rad/s\n"
     << "estimation bias/std theta: " << fmt9(r.estimation.bias_theta) << " / "
     << fmt9(r.estimation.std_theta) << " rad\n"
     << "estimation bias/std phi: " << fmt9(r.estimation.bias_phi) << " / "
     << fmt9(r.estimation.std_phi) << " rad\n";
  return os.str();
}

/// Self-contained top-view track plot (payload path, plan targets, waypoints).
/// Deterministic output; intended for quick inspection, not publication.
inline void write_svg_plot(const std::string& path, const RunLog& log,
                           const SparseReference& ref) {
  const double w = 640, h = 480, margin = 40;
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  auto grow = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const TickRecord& r : log.ticks) grow(r.payload_true(0), r.payload_true(1));
  for (const Vec3& p : ref.positions) grow(p(0), p(1));
  if (min_x > max_x) {
    min_x = min_y = -1;
    max_x = max_y = 1;
  }
  const double span_x = std::max(1e-6, max_x - min_x);
  const double span_y = std::max(1e-6, max_y - min_y);
  const double scale = std::min((w - 2 * margin) / span_x, (h - 2 * margin) / span_y);
  auto px = [&](double x) { return margin + (x - min_x) * scale; };
  auto py = [&](double y) { return h - margin - (y - min_y) * scale; };

  auto f = detail::open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const TickRecord& r : log.ticks)
    f << fmt9(px(r.payload_true(0))) << ',' << fmt9(py(r.payload_true(1))) << ' ';
  f << "\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1\" stroke-dasharray=\"4 3\" points=\"";
  for (const TickRecord& r : log.ticks)
    f << fmt9(px(r.plan_target(0))) << ',' << fmt9(py(r.plan_target(1))) << ' ';
  f << "\"/>\n";
  for (const Vec3& p : ref.positions)
    f << "<circle cx=\"" << fmt9(px(p(0))) << "\" cy=\"" << fmt9(py(p(1)))
      << "\" r=\"4\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  f << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">"
    << "payload track (blue), plan (green), waypoints (red); top view, meters</text>\n";
  f << "</svg>\n";
}

}  // namespace payload_mpc
