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
#include <string>
#include <vector>

#include "payload_mpc/controller.hpp"
#include "payload_mpc/estimator.hpp"
#include "payload_mpc/kinematics.hpp"
#include "payload_mpc/planner.hpp"
#include "payload_mpc/rk4.hpp"
#include "payload_mpc/rng.hpp"

namespace payload_mpc {

/// Position + cable-angle sensor model.
struct SensorConfig {
  Vec3 pos_noise_std{0.02, 0.02, 0.02};  // m
  Vec2 att_noise_std{0.01, 0.01};        // rad
  double measurement_rate = 100.0;       // Hz
  std::uint64_t seed = 1;
};

/// Noisy measurement [x, y, z, theta, phi]: UAV position and UAV tilt, the
/// rows selected by measurement_matrix().  Payload angles are never measured;
/// the filter reconstructs them.  Always draws five deviates so the stream
/// stays aligned regardless of noise levels.
inline Eigen::Matrix<double, kMeasDim, 1> measure(const FullState& x, const SensorConfig& cfg,
                                                  GaussianRng& rng) {
  Eigen::Matrix<double, kMeasDim, 1> y;
  y(0) = x(sx::kX) + cfg.pos_noise_std(0) * rng.normal();
  y(1) = x(sx::kY) + cfg.pos_noise_std(1) * rng.normal();
  y(2) = x(sx::kZ) + cfg.pos_noise_std(2) * rng.normal();
  y(3) = x(sx::kTheta) + cfg.att_noise_std(0) * rng.normal();
  y(4) = x(sx::kPhi) + cfg.att_noise_std(1) * rng.normal();
  return y;
}

/// Full closed-loop scenario description.  The reference carries absolute
/// times (any settle offset already applied); `duration <= 0` means run until
/// the last waypoint plus the planner tail.
struct ScenarioConfig {
  SystemParams true_params;     // plant
  SystemParams nominal_params;  // estimator/controller/planner model
  SensorConfig sensor;
  NoiseConfig noise;
  ControllerConfig controller;
  PlannerConfig planner;
  SolverSettings solver;
  SparseReference reference;
  double duration = 0.0;         // s
  double control_rate = 100.0;   // Hz
  double planner_rate = 1.0;     // Hz
  double integrator_rate = 1000.0;  // Hz
  bool jitter_dt = false;        // +-20% uniform jitter on the control period
  bool truth_feedback = false;   // bypass the estimator (diagnostics)
};

struct TickRecord {
  double t = 0.0;
  FullState x_true = FullState::Zero();     // absolute
  Vec3 payload_true = Vec3::Zero();
  Eigen::Matrix<double, kMeasDim, 1> measurement = Eigen::Matrix<double, kMeasDim, 1>::Zero();
  bool measurement_fresh = false;
  FullState estimate = FullState::Zero();   // absolute
  ControlInput command = ControlInput::Zero();  // absolute
  Vec3 plan_target = Vec3::Zero();
  bool solver_ok = true;
};

struct PlanRecord {
  double issued_at = 0.0;
  DenseReference plan;
};

struct RunLog {
  std::vector<TickRecord> ticks;
  std::vector<PlanRecord> plans;
  int replan_failures = 0;
};

namespace detail {

inline int exact_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const int n = static_cast<int>(std::lround(r));
  if (n < 1 || std::abs(r - n) > 1e-9)
    throw std::invalid_argument(std::string("run_closed_loop: ") + what +
                                " must be an integer ratio, got " + std::to_string(r));
  return n;
}

}  // namespace detail

/// Runs the full stack in lockstep: RK4 plant at the integrator rate, LKF +
/// tracking controller at the control rate, replanning at the planner rate.
/// Tick order: predict, measurement update, (re)plan, control, log, integrate.
inline RunLog run_closed_loop(const ScenarioConfig& sc) {
  sc.true_params.validate();
  sc.nominal_params.validate();
  sc.reference.validate();
  const int substeps = detail::exact_ratio(sc.integrator_rate, sc.control_rate,
                                           "integrator_rate / control_rate");
  const int meas_every = detail::exact_ratio(sc.control_rate, sc.sensor.measurement_rate,
                                             "control_rate / measurement_rate");
  const int ticks_per_plan = detail::exact_ratio(sc.control_rate, sc.planner_rate,
                                                 "control_rate / planner_rate");

  const double duration = sc.duration > 0.0
                              ? sc.duration
                              : sc.reference.times.back() + sc.planner.ol_tail;
  const int n_ticks = static_cast<int>(std::lround(duration * sc.control_rate)) + 1;
  const double dt_c = 1.0 / sc.control_rate;
  const double hover_f = hover_thrust(sc.nominal_params);

  const LinearModel lin = linearize_hover(sc.nominal_params);
  TrackingController controller(sc.nominal_params, sc.controller, lin, sc.solver);
  Planner planner(sc.nominal_params, sc.controller, sc.planner, lin, sc.solver);
  GaussianRng rng(sc.sensor.seed);

  // The vehicle starts in steady hover with the payload at the first waypoint.
  const Vec3 start_uav =
      sc.reference.positions.front() + Vec3(0.0, 0.0, sc.true_params.cable_length);
  FullState x_true = hover_state(sc.true_params, start_uav);
  ControlInput u_prev = hover_input(sc.nominal_params);

  Estimate est;
  est.mean = Eigen::VectorXd::Zero(kStateDim);
  est.mean.head<3>() = start_uav;
  est.cov = Eigen::MatrixXd::Identity(kStateDim, kStateDim);

  RunLog log;
  log.ticks.reserve(static_cast<size_t>(n_ticks));
  std::vector<DenseReference> plans;
  Eigen::Matrix<double, kMeasDim, 1> last_meas = Eigen::Matrix<double, kMeasDim, 1>::Zero();
  double t = 0.0;
  double last_dt = dt_c;

  for (int k = 0; k < n_ticks; ++k) {
    try {
      if (k > 0) est = predict(est, u_prev - hover_input(sc.nominal_params), last_dt, lin, sc.noise);

      const bool fresh = (k % meas_every == 0);
      if (fresh) {
        last_meas = measure(x_true, sc.sensor, rng);
        est = update(est, last_meas, sc.noise);
      }

      FullState x_fb = est.mean;
      if (sc.truth_feedback) {
        x_fb = x_true;
        x_fb(sx::kThrust) -= hover_f;
      }
      FullState x_fb_abs = x_fb;
      x_fb_abs(sx::kThrust) += hover_f;

      if (k == 0) {
        // Bootstrap plan, in force immediately; failure here is fatal.
        plans.push_back(planner.plan(x_fb_abs, u_prev, sc.reference, t));
        log.plans.push_back({t, plans.back()});
      }

      const TrackingController::StepResult step = controller.step(x_fb, u_prev, plans, t);

      if (k > 0 && k % ticks_per_plan == 0) {
        // Replan ahead of time, seeded from the controller's prediction at
        // the plan activation instant; on failure the old plan stays.
        const int lead = std::clamp(
            static_cast<int>(std::lround(sc.planner.t_plan / sc.controller.dt)), 0,
            sc.controller.horizon);
        const double t0 = t + static_cast<double>(lead) * sc.controller.dt;
        try {
          plans.push_back(planner.plan(step.predicted_states[static_cast<size_t>(lead)],
                                       step.predicted_inputs[static_cast<size_t>(lead)],
                                       sc.reference, t0));
          log.plans.push_back({t, plans.back()});
        } catch (const SolverFailed&) {
          ++log.replan_failures;
        }
      }

      TickRecord rec;
      rec.t = t;
      rec.x_true = x_true;
      rec.payload_true = payload_position(x_true.head<3>(), x_true(sx::kThetaL),
                                          x_true(sx::kPhiL), sc.true_params.cable_length);
      rec.measurement = last_meas;
      rec.measurement_fresh = fresh;
      rec.estimate = est.mean;
      rec.estimate(sx::kThrust) += hover_f;
      rec.command = step.command;
      rec.plan_target = active_plan(plans, t).sample_position(t);
      rec.solver_ok = step.solver_ok;
      log.ticks.push_back(rec);

      u_prev = step.command;
      double dt_k = dt_c;
      if (sc.jitter_dt) dt_k = dt_c * (1.0 + 0.2 * (2.0 * rng.uniform() - 1.0));
      x_true = rk4_integrate(x_true, u_prev, dt_k, substeps, sc.true_params);
      last_dt = dt_k;
      t += dt_k;
    } catch (const SolverFailed& e) {
      throw SolverFailed(std::string(e.what()) + " (tick " + std::to_string(k) + ", t=" +
                         std::to_string(t) + ")");
    } catch (const SingularConfiguration& e) {
      throw SingularConfiguration(std::string(e.what()) + " (tick " + std::to_string(k) +
                                  ", t=" + std::to_string(t) + ")");
    }
  }
  return log;
}

}  // namespace payload_mpc
