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

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "payload_mpc/simulator.hpp"

namespace payload_mpc {

/// Square sweep reference: alternating `side`-meter steps along +x, +y, -x,
/// -y at constant altitude, one waypoint every `dt` seconds, starting at the
/// origin corner.  One lap is five waypoints (the corner repeats at the end).
inline SparseReference square_trajectory(double dt, double side = 5.0, int laps = 1,
                                         double altitude = 1.0) {
  if (!(dt > 0.0)) throw std::invalid_argument("square_trajectory: dt must be positive");
  if (laps < 1) throw std::invalid_argument("square_trajectory: laps must be >= 1");
  const Vec3 corners[4] = {Vec3(0, 0, altitude), Vec3(side, 0, altitude),
                           Vec3(side, side, altitude), Vec3(0, side, altitude)};
  SparseReference ref;
  const int n = 4 * laps + 1;
  ref.times.resize(static_cast<size_t>(n));
  ref.positions.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ref.times[static_cast<size_t>(i)] = dt * i;
    ref.positions[static_cast<size_t>(i)] = corners[i % 4];
  }
  return ref;
}

/// Root-mean-square distance between timestamped positions and the
/// zero-order-hold reference.
inline double rmse(const std::vector<std::pair<double, Vec3>>& samples,
                   const SparseReference& ref) {
  if (samples.empty()) throw EmptyTrajectory("rmse: no samples");
  double acc = 0.0;
  for (const auto& [t, p] : samples) acc += (p - ref.sample_zoh(t)).squaredNorm();
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

/// Relative degradation of the executed trajectory against the idealized
/// plan, in percent.  Throws DivisionByZero on a zero baseline.
inline double delta_rmse(double rmse_executed, double rmse_open_loop) {
  if (rmse_open_loop == 0.0) throw DivisionByZero("delta_rmse: open-loop baseline is zero");
  return (rmse_executed - rmse_open_loop) / rmse_open_loop * 100.0;
}

/// Cable-angle estimation quality over a run.  Population statistics, so
/// rmse^2 == bias^2 + std^2 holds exactly per channel.
struct EstimationMetrics {
  double rmse_theta = 0.0, rmse_phi = 0.0;
  double rmse_theta_rate = 0.0, rmse_phi_rate = 0.0;
  double bias_theta = 0.0, bias_phi = 0.0;
  double std_theta = 0.0, std_phi = 0.0;
};

inline EstimationMetrics estimation_metrics(const RunLog& log) {
  if (log.ticks.empty()) throw EmptyTrajectory("estimation_metrics: empty log");
  const int idx[4] = {sx::kThetaL, sx::kPhiL, sx::kThetaLRate, sx::kPhiLRate};
  double mean[4] = {0, 0, 0, 0};
  double sq[4] = {0, 0, 0, 0};
  const double n = static_cast<double>(log.ticks.size());
  for (const TickRecord& r : log.ticks) {
    for (int c = 0; c < 4; ++c) {
      const double e = r.estimate(idx[c]) - r.x_true(idx[c]);
      mean[c] += e / n;
      sq[c] += e * e / n;
    }
  }
  EstimationMetrics m;
  m.rmse_theta = std::sqrt(sq[0]);
  m.rmse_phi = std::sqrt(sq[1]);
  m.rmse_theta_rate = std::sqrt(sq[2]);
  m.rmse_phi_rate = std::sqrt(sq[3]);
  m.bias_theta = mean[0];
  m.bias_phi = mean[1];
  m.std_theta = std::sqrt(std::max(0.0, sq[0] - mean[0] * mean[0]));
  m.std_phi = std::sqrt(std::max(0.0, sq[1] - mean[1] * mean[1]));
  return m;
}

struct MetricsReport {
  std::string name;
  bool ok = false;
  std::string error;
  double payload_mass = 0.0;
  double cable_length = 0.0;
  double waypoint_dt = 0.0;
  double rmse_open_loop = 0.0;
  double rmse_executed = 0.0;
  double delta_percent = 0.0;
  EstimationMetrics estimation;
};

struct EvalResult {
  RunLog log;
  DenseReference open_loop;
  MetricsReport report;
};

/// Runs the scenario closed-loop, computes the open-loop baseline with the
/// same planner formulation, and scores both over the reference time span
/// [first waypoint, last waypoint].  The run itself continues through the
/// settling tail so the final waypoint is actually reached.  Scenarios built
/// from a RepoConfig already carry the hover settling shift in their
/// waypoint times, so everything before the first waypoint is scored out.
inline EvalResult evaluate_scenario(const ScenarioConfig& scenario,
                                    const std::string& name = "scenario") {
  ScenarioConfig sc = scenario;
  if (sc.duration <= 0.0) sc.duration = sc.reference.times.back() + sc.planner.ol_tail;

  EvalResult out;
  out.report.name = name;
  // The labeled (model) parameters, not the plant's: in a mismatch sweep the
  // label is the axis value.
  out.report.payload_mass = sc.nominal_params.payload_mass;
  out.report.cable_length = sc.nominal_params.cable_length;
  out.report.waypoint_dt =
      sc.reference.times.size() > 1 ? sc.reference.times[1] - sc.reference.times[0] : 0.0;

  const LinearModel lin = linearize_hover(sc.nominal_params);
  Planner planner(sc.nominal_params, sc.controller, sc.planner, lin, sc.solver);
  const Vec3 start_uav =
      sc.reference.positions.front() + Vec3(0.0, 0.0, sc.nominal_params.cable_length);
  out.open_loop = planner.plan_open_loop(hover_state(sc.nominal_params, start_uav),
                                         hover_input(sc.nominal_params), sc.reference);

  out.log = run_closed_loop(sc);

  const double t_lo = sc.reference.times.front() - 1e-9;
  const double t_hi = sc.reference.times.back() + 1e-9;
  std::vector<std::pair<double, Vec3>> exec_samples, ol_samples;
  RunLog window;
  for (const TickRecord& r : out.log.ticks) {
    if (r.t < t_lo || r.t > t_hi) continue;
    exec_samples.emplace_back(r.t, r.payload_true);
    ol_samples.emplace_back(r.t, out.open_loop.sample_position(r.t));
    window.ticks.push_back(r);
  }
  out.report.rmse_executed = rmse(exec_samples, sc.reference);
  out.report.rmse_open_loop = rmse(ol_samples, sc.reference);
  // A stationary reference gives a zero baseline; degradation relative to it
  // is undefined rather than an error at this level.
  out.report.delta_percent = out.report.rmse_open_loop > 0.0
                                 ? delta_rmse(out.report.rmse_executed, out.report.rmse_open_loop)
                                 : std::numeric_limits<double>::quiet_NaN();
  out.report.estimation = estimation_metrics(window);
  out.report.ok = true;
  return out;
}

/// Cartesian sweep over payload mass, cable length and waypoint spacing.
struct SweepGrid {
  std::vector<double> payload_masses{0.5, 1.0, 1.5};
  std::vector<double> cable_lengths{1.0, 2.0, 3.0};
  std::vector<double> waypoint_spacings{2.0};
};

struct SweepCell {
  std::string name;
  ScenarioConfig scenario;
};

namespace detail {

inline std::string sweep_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

/// Suspension line density in the sweep plant, kg/m.  The model treats the
/// line as massless; the plant gives it this mass.  A uniform line of mass
/// m_c = density * l swinging with a tip payload m_l behaves as a point
/// pendulum of length l * (m_c/3 + m_l) / (m_c/2 + m_l), shorter than the
/// attachment length, and the plant also hauls the line's weight.  Both
/// plant-model gaps shrink as the payload outweighs the line, which is the
/// sweep's robustness axis.
inline constexpr double kSweepLineDensity = 0.1;

/// Expands the grid into named scenarios: per cell the model gets the
/// labeled payload mass and cable length while the plant carries the massive
/// suspension line, the base reference is retimed to the cell's waypoint
/// spacing, and the duration follows the retimed reference.  Deterministic
/// order: mass-major.
inline std::vector<SweepCell> sweep_cells(const SweepGrid& grid, const ScenarioConfig& base) {
  std::vector<SweepCell> cells;
  for (double ml : grid.payload_masses)
    for (double l : grid.cable_lengths)
      for (double dt : grid.waypoint_spacings) {
        SweepCell c;
        c.name = "ml" + detail::sweep_value(ml) + "_l" + detail::sweep_value(l) + "_dt" +
                 detail::sweep_value(dt);
        c.scenario = base;
        const double mc = kSweepLineDensity * l;
        c.scenario.true_params.payload_mass = ml + mc;
        c.scenario.true_params.cable_length = l * (mc / 3.0 + ml) / (mc / 2.0 + ml);
        c.scenario.nominal_params.payload_mass = ml;
        c.scenario.nominal_params.cable_length = l;
        c.scenario.reference = base.reference.retimed(dt);
        c.scenario.duration = 0.0;
        cells.push_back(std::move(c));
      }
  return cells;
}

/// Evaluates one cell, capturing any failure in the report instead of
/// throwing.
inline MetricsReport evaluate_cell(const SweepCell& cell) {
  try {
    return evaluate_scenario(cell.scenario, cell.name).report;
  } catch (const std::exception& e) {
    MetricsReport r;
    r.name = cell.name;
    r.ok = false;
    r.error = e.what();
    r.payload_mass = cell.scenario.nominal_params.payload_mass;
    r.cable_length = cell.scenario.nominal_params.cable_length;
    r.waypoint_dt = cell.scenario.reference.times.size() > 1
                        ? cell.scenario.reference.times[1] - cell.scenario.reference.times[0]
                        : 0.0;
    return r;
  }
}

/// Evaluates every grid cell in parallel; a failed cell is reported with
/// ok=false instead of aborting the sweep.  Report order matches cell order.
inline std::vector<MetricsReport> sweep(const SweepGrid& grid, const ScenarioConfig& base) {
  const std::vector<SweepCell> cells = sweep_cells(grid, base);
  std::vector<std::future<MetricsReport>> jobs;
  jobs.reserve(cells.size());
  for (const SweepCell& c : cells)
    jobs.push_back(std::async(std::launch::async, [&c]() { return evaluate_cell(c); }));
  std::vector<MetricsReport> reports;
  reports.reserve(jobs.size());
  for (auto& j : jobs) reports.push_back(j.get());
  return reports;
}

}  // namespace payload_mpc
