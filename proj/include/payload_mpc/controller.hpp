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
#include <algorithm>
#include <vector>

#include "payload_mpc/linearize.hpp"
#include "payload_mpc/reference.hpp"
#include "payload_mpc/solver.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

constexpr int kAugDim = kStateDim + kInputDim;  // model state + held input
constexpr int kOutDim = 6;                      // payload position + input

using AugState = Eigen::Matrix<double, kAugDim, 1>;
using OutVec = Eigen::Matrix<double, kOutDim, 1>;

/// Tracking-controller tuning.  Defaults follow the shipped configuration.
struct ControllerConfig {
  int horizon = 50;
  double dt = 0.05;                        // stage sampling time, s
  Vec3 payload_weights{10.0, 10.0, 10000.0};
  Vec3 input_weights{0.0, 0.0, 0.05};
  Vec3 rate_weights{100.0, 100.0, 5.0};
  double slack_weight = 10.0;
  double velocity_bound = 10.0;            // m/s, per axis
  double tilt_bound = 0.75;                // rad

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("ControllerConfig: horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("ControllerConfig: dt must be positive");
    if ((payload_weights.array() < 0).any() || (input_weights.array() < 0).any() ||
        (rate_weights.array() < 0).any() || slack_weight < 0)
      throw std::invalid_argument("ControllerConfig: weights must be non-negative");
    if (!(velocity_bound > 0.0) || !(tilt_bound > 0.0))
      throw std::invalid_argument("ControllerConfig: bounds must be positive");
  }
};

/// Discrete model over the augmented state [x; u] with input du:
///   [x; u]+ = [[Ad, Bd], [0, I]] [x; u] + [[Bd], [I]] du.
/// The augmented u entry carries the input applied over the previous stage.
struct IncrementalModel {
  Eigen::Matrix<double, kAugDim, kAugDim> A;
  Eigen::Matrix<double, kAugDim, kInputDim> B;
  double dt = 0.0;
};

inline IncrementalModel incremental_model(const LinearModel& model, double dt) {
  const DiscreteModel d = discretize_zoh(model, dt);
  IncrementalModel m;
  m.A.setZero();
  m.B.setZero();
  m.A.topLeftCorner<kStateDim, kStateDim>() = d.A;
  m.A.topRightCorner<kStateDim, kInputDim>() = d.B;
  m.A.bottomRightCorner<kInputDim, kInputDim>().setIdentity();
  m.B.topRows<kStateDim>() = d.B;
  m.B.bottomRows<kInputDim>().setIdentity();
  m.dt = dt;
  return m;
}

/// Affine output y = C xa + d: small-angle payload position
/// (s_uav + l (-theta_l, phi_l, -1)) followed by the held input.
struct OutputMap {
  Eigen::Matrix<double, kOutDim, kAugDim> C;
  OutVec d;
};

inline OutputMap output_map(double cable_length) {
  OutputMap m;
  m.C.setZero();
  m.d.setZero();
  m.C(0, sx::kX) = 1.0;
  m.C(0, sx::kThetaL) = -cable_length;
  m.C(1, sx::kY) = 1.0;
  m.C(1, sx::kPhiL) = cable_length;
  m.C(2, sx::kZ) = 1.0;
  m.d(2) = -cable_length;
  m.C.bottomRightCorner<kInputDim, kInputDim>().setIdentity();
  return m;
}

/// Everything the OCP builder needs besides the targets; shared between the
/// tracking controller and the planner (which overrides rate weights, the
/// tilt bound and the stage count).
struct TrackingWeights {
  Vec3 payload_weights;
  Vec3 input_weights;
  Vec3 rate_weights;
  double slack_weight = 10.0;
  double velocity_bound = 10.0;
  double tilt_bound = 0.75;
};

/// Builds the stage QP: quadratic output-tracking cost over the augmented
/// model with input-increment decision variables and soft bounds on the
/// translational velocities and the attitude-loop tilt states.  `targets`
/// holds N+1 desired outputs (payload position, input deviation); `omega`
/// optionally scales the output cost per stage.
inline OcpQp build_tracking_ocp(const AugState& x0, const std::vector<OutVec>& targets,
                                const TrackingWeights& w, const std::vector<double>& omega,
                                const IncrementalModel& inc, const OutputMap& out) {
  const size_t nn = targets.size();
  if (nn < 2) throw DimensionMismatch("build_tracking_ocp: need at least 2 target stages");
  if (!omega.empty() && omega.size() != nn)
    throw DimensionMismatch("build_tracking_ocp: omega length must match targets");

  Eigen::Matrix<double, kOutDim, 1> wdiag;
  wdiag << w.payload_weights, w.input_weights;
  const Eigen::Matrix<double, kAugDim, kAugDim> q_full =
      out.C.transpose() * wdiag.asDiagonal() * out.C;

  OcpQp qp;
  qp.x0 = x0;
  qp.stages.resize(nn);
  for (size_t n = 0; n < nn; ++n) {
    OcpStage& s = qp.stages[n];
    const bool terminal = (n + 1 == nn);
    const double om = omega.empty() ? 1.0 : omega[n];
    const Eigen::Index nu = terminal ? 0 : kInputDim;

    s.Q = om * q_full;
    s.q = om * (out.C.transpose() * wdiag.asDiagonal() * (out.d - targets[n]));
    s.R = Eigen::MatrixXd::Zero(nu, nu);
    if (!terminal) {
      s.R = w.rate_weights.asDiagonal();
      s.A = inc.A;
      s.B = inc.B;
    }

    const Eigen::Index rows = nu + kAugDim;
    s.lb = Eigen::VectorXd::Constant(rows, -kUnbounded);
    s.ub = Eigen::VectorXd::Constant(rows, kUnbounded);
    s.zl = Eigen::VectorXd::Zero(rows);
    s.zu = Eigen::VectorXd::Zero(rows);
    auto bound = [&](int state_index, double b) {
      const Eigen::Index row = nu + state_index;
      s.lb(row) = -b;
      s.ub(row) = b;
      s.zl(row) = w.slack_weight;
      s.zu(row) = w.slack_weight;
    };
    bound(sx::kVx, w.velocity_bound);
    bound(sx::kVy, w.velocity_bound);
    bound(sx::kVz, w.velocity_bound);
    bound(sx::kTheta, w.tilt_bound);
    bound(sx::kPhi, w.tilt_bound);
  }
  return qp;
}

/// Receding-horizon tracking controller.  Feedback state and commands live in
/// deviation coordinates internally; the public interface takes the estimate
/// deviation mean and absolute inputs.
class TrackingController {
 public:
  TrackingController(const SystemParams& nominal, const ControllerConfig& cfg,
                     const LinearModel& model, const SolverSettings& solver_settings)
      : params_(nominal),
        cfg_(cfg),
        settings_(solver_settings),
        inc_(incremental_model(model, cfg.dt)),
        out_(output_map(nominal.cable_length)),
        u_eq_(hover_input(nominal)) {
    cfg_.validate();
    weights_ = TrackingWeights{cfg.payload_weights, cfg.input_weights, cfg.rate_weights,
                               cfg.slack_weight,    cfg.velocity_bound, cfg.tilt_bound};
  }

  struct StepResult {
    ControlInput command;                        // absolute, clamped
    std::vector<FullState> predicted_states;     // absolute, horizon + 1
    std::vector<ControlInput> predicted_inputs;  // absolute input entering each stage
    bool solver_ok = true;
    int iterations = 0;
  };

  /// One control tick at time t_now: samples the plan in force over the
  /// horizon, solves for the input increments and returns u_prev + du0.
  /// Holds the previous command on solver failure; throws SolverFailed after
  /// five consecutive failures.
  StepResult step(const FullState& x_dev, const ControlInput& u_prev,
                  const std::vector<DenseReference>& plans, double t_now) {
    const ControlInput u_prev_dev = u_prev - u_eq_;
    AugState x0;
    x0 << x_dev, u_prev_dev;

    std::vector<OutVec> targets(static_cast<size_t>(cfg_.horizon) + 1);
    for (size_t n = 0; n < targets.size(); ++n) {
      const double tn = t_now + static_cast<double>(n) * cfg_.dt;
      const DenseReference& plan = active_plan(plans, tn);
      targets[n] << plan.sample_position(tn), plan.sample_input(tn) - u_eq_;
    }

    const OcpQp qp = build_tracking_ocp(x0, targets, weights_, {}, inc_, out_);
    // Warm-start from the last solution, shifted by however many whole
    // prediction stages have elapsed (the tick rate can exceed the stage rate).
    const OcpSolution* warm = nullptr;
    OcpSolution shifted;
    if (have_warm_) {
      const int steps = static_cast<int>(std::lround((t_now - last_t_) / cfg_.dt));
      if (steps >= 0 && steps < cfg_.horizon) {
        shifted = shift_solution(warm_, steps);
        warm = &shifted;
      }
    }
    OcpSolution sol = solver_.solve(qp, settings_, warm);

    StepResult res;
    res.iterations = sol.iterations;
    if (sol.status != SolveStatus::Optimal) {
      if (++consecutive_failures_ > 5)
        throw SolverFailed("controller: solver failed on more than 5 consecutive ticks");
      res.solver_ok = false;
      res.command = clamp_command(u_prev);
      res.predicted_states.assign(static_cast<size_t>(cfg_.horizon) + 1,
                                  to_absolute_state(x_dev));
      res.predicted_inputs.assign(static_cast<size_t>(cfg_.horizon) + 1, res.command);
      return res;
    }
    consecutive_failures_ = 0;
    warm_ = sol;
    last_t_ = t_now;
    have_warm_ = true;

    res.command = clamp_command(u_prev + sol.u[0]);
    res.predicted_states.resize(sol.x.size());
    res.predicted_inputs.resize(sol.x.size());
    for (size_t n = 0; n < sol.x.size(); ++n) {
      res.predicted_states[n] = to_absolute_state(sol.x[n].head<kStateDim>());
      res.predicted_inputs[n] = sol.x[n].tail<kInputDim>() + u_eq_;
    }
    return res;
  }

  const IncrementalModel& model() const { return inc_; }
  const OutputMap& output() const { return out_; }
  const TrackingWeights& weights() const { return weights_; }

 private:
  ControlInput clamp_command(ControlInput u) const {
    u(su::kThetaCmd) = std::clamp(u(su::kThetaCmd), -cfg_.tilt_bound, cfg_.tilt_bound);
    u(su::kPhiCmd) = std::clamp(u(su::kPhiCmd), -cfg_.tilt_bound, cfg_.tilt_bound);
    return u;
  }

  FullState to_absolute_state(const FullState& dev) const {
    FullState abs = dev;
    abs(sx::kThrust) += hover_thrust(params_);
    return abs;
  }

  SystemParams params_;
  ControllerConfig cfg_;
  SolverSettings settings_;
  IncrementalModel inc_;
  OutputMap out_;
  ControlInput u_eq_;
  TrackingWeights weights_;
  OcpSolver solver_;
  OcpSolution warm_;
  bool have_warm_ = false;
  double last_t_ = 0.0;
  int consecutive_failures_ = 0;
};

}  // namespace payload_mpc
