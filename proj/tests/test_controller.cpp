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
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "payload_mpc/controller.hpp"
#include "payload_mpc/rng.hpp"

namespace payload_mpc {
namespace {

DenseReference constant_plan(const Vec3& payload_pos, const ControlInput& input) {
  DenseReference plan;
  plan.start_time = 0.0;
  plan.dt = 1.0;
  plan.positions = {payload_pos};
  plan.inputs = {input};
  return plan;
}

TEST(Controller, IncrementalModelBlocks) {
  const SystemParams p;
  const LinearModel lin = linearize_hover(p);
  const double dt = 0.05;
  const DiscreteModel d = discretize_zoh(lin, dt);
  const IncrementalModel inc = incremental_model(lin, dt);

  EXPECT_LT((inc.A.topLeftCorner<kStateDim, kStateDim>() - d.A).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((inc.A.topRightCorner<kStateDim, kInputDim>() - d.B).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(inc.A.bottomLeftCorner<kInputDim, kStateDim>().cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((inc.A.bottomRightCorner<kInputDim, kInputDim>() -
             Eigen::Matrix3d::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
  EXPECT_LT((inc.B.topRows<kStateDim>() - d.B).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((inc.B.bottomRows<kInputDim>() - Eigen::Matrix3d::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
}

// One augmented step with increment du equals holding u_prev + du over the
// plain discrete model; zero increment keeps the held input.
TEST(Controller, IncrementalStepEquivalence) {
  const SystemParams p;
  const LinearModel lin = linearize_hover(p);
  const double dt = 0.05;
  const DiscreteModel d = discretize_zoh(lin, dt);
  const IncrementalModel inc = incremental_model(lin, dt);

  GaussianRng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    FullState x;
    ControlInput u_prev, du;
    for (int i = 0; i < kStateDim; ++i) x(i) = 0.2 * rng.normal();
    for (int i = 0; i < kInputDim; ++i) {
      u_prev(i) = 0.2 * rng.normal();
      du(i) = 0.2 * rng.normal();
    }
    AugState xa;
    xa << x, u_prev;
    const AugState next = inc.A * xa + inc.B * du;
    const ControlInput u_applied = u_prev + du;
    const FullState expected = d.A * x + d.B * u_applied;
    EXPECT_LT((next.head<kStateDim>() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((next.tail<kInputDim>() - u_applied).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Controller, OutputMapSmallAngleGeometry) {
  const double l = 2.0;
  const OutputMap out = output_map(l);

  AugState xa = AugState::Zero();
  OutVec y = out.C * xa + out.d;
  EXPECT_LT((y.head<3>() - Vec3(0, 0, -l)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(y.tail<3>().cwiseAbs().maxCoeff(), 1e-15);

  xa(sx::kThetaL) = 0.1;
  y = out.C * xa + out.d;
  EXPECT_NEAR(y(0), -0.2, 1e-12);  // forward swing moves the payload back

  // Against the exact kinematics: the small-angle error is bounded by l*a^2.
  GaussianRng rng(43);
  for (int i = 0; i < 50; ++i) {
    const double th = 0.05 * (2.0 * rng.uniform() - 1.0);
    const double ph = 0.05 * (2.0 * rng.uniform() - 1.0);
    AugState xs = AugState::Zero();
    xs(sx::kThetaL) = th;
    xs(sx::kPhiL) = ph;
    const Vec3 approx = (out.C * xs + out.d).head<3>();
    const Vec3 exact = payload_position(Vec3::Zero(), th, ph, l);
    const double a2 = th * th + ph * ph;
    EXPECT_LT((approx - exact).norm(), l * a2 + 1e-12);
  }
}

TEST(Controller, TrackingOcpBoundRows) {
  const SystemParams p;
  const LinearModel lin = linearize_hover(p);
  const ControllerConfig cfg;
  const IncrementalModel inc = incremental_model(lin, cfg.dt);
  const OutputMap out = output_map(p.cable_length);
  const TrackingWeights w{cfg.payload_weights, cfg.input_weights, cfg.rate_weights,
                          cfg.slack_weight,    cfg.velocity_bound, cfg.tilt_bound};

  const std::vector<OutVec> targets(11, OutVec::Zero());
  const OcpQp qp = build_tracking_ocp(AugState::Zero(), targets, w, {}, inc, out);
  ASSERT_EQ(qp.stages.size(), 11u);
  EXPECT_NO_THROW(qp.validate());

  for (size_t n = 0; n < qp.stages.size(); ++n) {
    const OcpStage& s = qp.stages[n];
    const bool terminal = (n + 1 == qp.stages.size());
    const Eigen::Index nu = terminal ? 0 : kInputDim;
    ASSERT_EQ(s.lb.size(), nu + kAugDim);

    const int velocity_rows[3] = {sx::kVx, sx::kVy, sx::kVz};
    for (int idx : velocity_rows) {
      EXPECT_DOUBLE_EQ(s.lb(nu + idx), -cfg.velocity_bound);
      EXPECT_DOUBLE_EQ(s.ub(nu + idx), cfg.velocity_bound);
      EXPECT_DOUBLE_EQ(s.zl(nu + idx), cfg.slack_weight);
      EXPECT_DOUBLE_EQ(s.zu(nu + idx), cfg.slack_weight);
    }
    EXPECT_DOUBLE_EQ(s.ub(nu + sx::kTheta), cfg.tilt_bound);
    EXPECT_DOUBLE_EQ(s.lb(nu + sx::kPhi), -cfg.tilt_bound);
    // Position rows stay open.
    EXPECT_LE(s.lb(nu + sx::kX), -kUnbounded);
    EXPECT_GE(s.ub(nu + sx::kZ), kUnbounded);
    EXPECT_DOUBLE_EQ(s.zl(nu + sx::kX), 0.0);
  }
}

// The stage QP must represent the weighted output-tracking cost exactly, up
// to the per-stage constants it drops.
TEST(Controller, TrackingOcpObjectiveEquivalence) {
  const SystemParams p;
  const LinearModel lin = linearize_hover(p);
  const ControllerConfig cfg;
  const IncrementalModel inc = incremental_model(lin, cfg.dt);
  const OutputMap out = output_map(p.cable_length);
  const TrackingWeights w{cfg.payload_weights, cfg.input_weights, cfg.rate_weights,
                          cfg.slack_weight,    cfg.velocity_bound, cfg.tilt_bound};

  GaussianRng rng(47);
  const size_t nn = 6;
  std::vector<OutVec> targets(nn);
  std::vector<double> omega(nn);
  std::vector<Eigen::VectorXd> x(nn);
  std::vector<Eigen::VectorXd> u(nn - 1);
  for (size_t n = 0; n < nn; ++n) {
    targets[n] = 0.2 * OutVec::NullaryExpr([&](Eigen::Index) { return rng.normal(); });
    omega[n] = 0.3 + rng.uniform();
    x[n] = 0.1 * Eigen::VectorXd::NullaryExpr(kAugDim, [&](Eigen::Index) { return rng.normal(); });
    if (n + 1 < nn)
      u[n] = 0.1 *
             Eigen::VectorXd::NullaryExpr(kInputDim, [&](Eigen::Index) { return rng.normal(); });
  }

  const OcpQp qp = build_tracking_ocp(x[0], targets, w, omega, inc, out);

  Eigen::Matrix<double, kOutDim, 1> wdiag;
  wdiag << w.payload_weights, w.input_weights;
  double direct = 0.0;
  double dropped = 0.0;
  for (size_t n = 0; n < nn; ++n) {
    const OutVec err = out.C * x[n] + out.d - targets[n];
    direct += 0.5 * omega[n] * err.dot(wdiag.asDiagonal() * err);
    const OutVec off = out.d - targets[n];
    dropped += 0.5 * omega[n] * off.dot(wdiag.asDiagonal() * off);
    if (n + 1 < nn) direct += 0.5 * u[n].dot(w.rate_weights.asDiagonal() * u[n]);
  }
  const double via_qp = ocp_objective(qp, x, u) + dropped;
  EXPECT_NEAR(via_qp, direct, 1e-9 * (1.0 + std::abs(direct)));
}

TEST(Controller, HoverIsStationary) {
  const SystemParams p;
  const ControllerConfig cfg;
  const SolverSettings settings;
  TrackingController controller(p, cfg, linearize_hover(p), settings);

  const std::vector<DenseReference> plans = {
      constant_plan(Vec3(0, 0, -p.cable_length), hover_input(p))};
  const auto res = controller.step(FullState::Zero(), hover_input(p), plans, 0.0);
  EXPECT_TRUE(res.solver_ok);
  EXPECT_LT((res.command - hover_input(p)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Controller, StepTowardTargetPitchesForward) {
  const SystemParams p;
  const ControllerConfig cfg;
  TrackingController controller(p, cfg, linearize_hover(p), SolverSettings{});

  const std::vector<DenseReference> plans = {
      constant_plan(Vec3(5, 0, -p.cable_length), hover_input(p))};
  const auto res = controller.step(FullState::Zero(), hover_input(p), plans, 0.0);
  ASSERT_TRUE(res.solver_ok);
  EXPECT_GT(res.command(su::kThetaCmd), 1e-4);
  EXPECT_LE(std::abs(res.command(su::kThetaCmd)), cfg.tilt_bound);
  EXPECT_LE(std::abs(res.command(su::kPhiCmd)), cfg.tilt_bound);
}

// Zero-mean estimate noise must not bias the commands: regulation about
// hover keeps each channel's mean far below its standard deviation.
TEST(Controller, NoisyRegulationIsUnbiased) {
  const SystemParams p;
  ControllerConfig cfg;
  TrackingController controller(p, cfg, linearize_hover(p), SolverSettings{});
  const std::vector<DenseReference> plans = {
      constant_plan(Vec3(0, 0, -p.cable_length), hover_input(p))};

  GaussianRng rng(53);
  const int ticks = 1000;
  const double tick_dt = 0.01;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sum_sq = Eigen::Vector3d::Zero();
  ControlInput u_prev = hover_input(p);
  for (int k = 0; k < ticks; ++k) {
    FullState x_noise;
    for (int i = 0; i < kStateDim; ++i) x_noise(i) = 0.01 * rng.normal();
    const auto res = controller.step(x_noise, u_prev, plans, k * tick_dt);
    ASSERT_TRUE(res.solver_ok) << "tick " << k;
    const ControlInput dev = res.command - hover_input(p);
    sum += dev;
    sum_sq += dev.cwiseProduct(dev);
    u_prev = res.command;
  }
  for (int i = 0; i < 3; ++i) {
    const double mean = sum(i) / ticks;
    const double var = sum_sq(i) / ticks - mean * mean;
    ASSERT_GT(var, 1e-12) << "channel " << i;
    EXPECT_LT(std::abs(mean), 0.1 * std::sqrt(var)) << "channel " << i;
  }
}

}  // namespace
}  // namespace payload_mpc
