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
#include <vector>

#include "payload_mpc/controller.hpp"
#include "payload_mpc/reference.hpp"

namespace payload_mpc {

/// Planner tuning.  The planner reuses the tracking formulation with a longer
/// horizon, stage weights faded by waypoint proximity, stiffer input-rate
/// costs and a tighter tilt corridor.
struct PlannerConfig {
  int horizon = 300;
  // Waypoint proximity kernel width (standard deviation), s.  The source
  // tuning table lists this kernel's variance as 0.25 s^2; the width below is
  // its square root.  Narrower widths starve the inter-waypoint stages of
  // output cost and the planner answers with large pendulum swings.
  double sigma = 0.5;
  Vec3 rate_weights{500.0, 500.0, 5.0};
  double tilt_bound = 0.5;  // rad
  double t_plan = 1.0;      // replan lead time, s
  double ol_tail = 3.0;     // open-loop horizon past the last waypoint, s

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("PlannerConfig: horizon must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("PlannerConfig: sigma must be positive");
    if ((rate_weights.array() < 0).any())
      throw std::invalid_argument("PlannerConfig: rate weights must be non-negative");
    if (!(tilt_bound > 0.0)) throw std::invalid_argument("PlannerConfig: tilt bound must be positive");
    if (t_plan < 0.0 || ol_tail < 0.0)
      throw std::invalid_argument("PlannerConfig: times must be non-negative");
  }
};

/// Per-stage cost multiplier: nearest-waypoint Gaussian proximity,
/// omega_i = max_k exp(-(t_k - t_i)^2 / (2 sigma^2)).  Output error is paid
/// where a waypoint is due and forgiven between waypoints.
inline std::vector<double> contouring_weights(const std::vector<double>& waypoint_times,
                                              const std::vector<double>& stage_times,
                                              double sigma) {
  if (waypoint_times.empty()) throw EmptyTrajectory("contouring_weights: no waypoints");
  if (!(sigma > 0.0)) throw std::invalid_argument("contouring_weights: sigma must be positive");
  std::vector<double> omega(stage_times.size(), 0.0);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (size_t i = 0; i < stage_times.size(); ++i) {
    double best = 0.0;
    for (double tk : waypoint_times) {
      const double d = tk - stage_times[i];
      best = std::max(best, std::exp(-d * d * inv));
    }
    omega[i] = best;
  }
  return omega;
}

/// Receding trajectory planner.  Produces densely sampled position/input
/// plans for the tracking controller by solving the same augmented OCP with
/// waypoint-proximity-faded weights over a long horizon.
class Planner {
 public:
  Planner(const SystemParams& nominal, const ControllerConfig& tracker_cfg,
          const PlannerConfig& cfg, const LinearModel& model,
          const SolverSettings& solver_settings)
      : params_(nominal),
        cfg_(cfg),
        dt_(tracker_cfg.dt),
        settings_(solver_settings),
        inc_(incremental_model(model, tracker_cfg.dt)),
        out_(output_map(nominal.cable_length)),
        u_eq_(hover_input(nominal)) {
    cfg_.validate();
    weights_ = TrackingWeights{tracker_cfg.payload_weights, tracker_cfg.input_weights,
                               cfg.rate_weights,            tracker_cfg.slack_weight,
                               tracker_cfg.velocity_bound,  cfg.tilt_bound};
  }

  /// Plans from the given absolute state and previous input, starting at t0.
  /// The returned plan spans [t0, t0 + horizon * dt].
  DenseReference plan(const FullState& x_abs, const ControlInput& u_prev,
                      const SparseReference& ref, double t0) {
    DenseReference out = solve(x_abs, u_prev, ref, t0, cfg_.horizon, true);
    last_t0_ = t0;
    return out;
  }

  /// One solve covering the whole reference plus a tail; the idealized
  /// trajectory a disturbance-free execution would follow.
  DenseReference plan_open_loop(const FullState& x_abs, const ControlInput& u_prev,
                                const SparseReference& ref) const {
    ref.validate();
    const double t0 = ref.times.front();
    const double span = ref.times.back() - t0 + cfg_.ol_tail;
    const int n = std::max(1, static_cast<int>(std::ceil(span / dt_ - 1e-9)));
    return solve(x_abs, u_prev, ref, t0, n, false);
  }

  const PlannerConfig& config() const { return cfg_; }
  double stage_dt() const { return dt_; }

 private:
  DenseReference solve(const FullState& x_abs, const ControlInput& u_prev,
                       const SparseReference& ref, double t0, int horizon,
                       bool use_warm) const {
    ref.validate();
    FullState x_dev = x_abs;
    x_dev(sx::kThrust) -= hover_thrust(params_);
    AugState x0;
    x0 << x_dev, u_prev - u_eq_;

    const size_t nn = static_cast<size_t>(horizon) + 1;
    std::vector<double> stage_times(nn);
    std::vector<OutVec> targets(nn);
    for (size_t n = 0; n < nn; ++n) {
      stage_times[n] = t0 + static_cast<double>(n) * dt_;
      targets[n] << ref.sample_zoh(stage_times[n]), Vec3::Zero();
    }
    std::vector<double> omega = contouring_weights(ref.times, stage_times, cfg_.sigma);
    // Outside the waypoint span the held endpoint is a constant target, so
    // full tracking weight applies; the Gaussian relaxation is only
    // meaningful between waypoints.  A decaying weight there would leave the
    // pre-arrival and post-arrival stages costless and let the plan drift.
    for (size_t n = 0; n < nn; ++n)
      if (stage_times[n] <= ref.times.front() || stage_times[n] >= ref.times.back())
        omega[n] = 1.0;

    const OcpQp qp = build_tracking_ocp(x0, targets, weights_, omega, inc_, out_);
    const OcpSolution* warm = nullptr;
    OcpSolution shifted;
    if (use_warm && have_warm_ && warm_.x.size() == nn) {
      const int steps = static_cast<int>(std::lround((t0 - last_t0_) / dt_));
      if (steps >= 0 && steps < horizon) {
        shifted = shift_solution(warm_, steps);
        warm = &shifted;
      }
    }
    OcpSolution sol = solver_.solve(qp, settings_, warm);
    if (sol.status != SolveStatus::Optimal)
      throw SolverFailed(std::string("planner: ") + to_string(sol.status) +
                         ", kkt=" + std::to_string(sol.kkt));
    if (use_warm) {
      warm_ = sol;
      have_warm_ = true;
    }

    DenseReference plan;
    plan.start_time = t0;
    plan.dt = dt_;
    plan.positions.resize(nn);
    plan.inputs.resize(nn);
    for (size_t n = 0; n < nn; ++n) {
      const OutVec y = out_.C * sol.x[n] + out_.d;
      plan.positions[n] = y.head<3>();
      plan.inputs[n] = sol.x[n].tail<kInputDim>() + u_eq_;
    }
    return plan;
  }

  SystemParams params_;
  PlannerConfig cfg_;
  double dt_;
  SolverSettings settings_;
  IncrementalModel inc_;
  OutputMap out_;
  ControlInput u_eq_;
  TrackingWeights weights_;
  mutable OcpSolver solver_;
  mutable OcpSolution warm_;
  mutable bool have_warm_ = false;
  double last_t0_ = 0.0;
};

}  // namespace payload_mpc
