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

#include "payload_mpc/eval.hpp"
#include "payload_mpc/planner.hpp"
#include "payload_mpc/solver.hpp"

namespace payload_mpc {
namespace {

TEST(Planner, ContouringWeightsKernelValues) {
  const std::vector<double> waypoints = {0.0, 2.0};
  const double sigma = 0.25;

  // Unit weight exactly at waypoint times.
  auto at_wp = contouring_weights(waypoints, {0.0, 2.0}, sigma);
  EXPECT_DOUBLE_EQ(at_wp[0], 1.0);
  EXPECT_DOUBLE_EQ(at_wp[1], 1.0);

  // One standard deviation off a waypoint.
  auto at_sigma = contouring_weights(waypoints, {sigma}, sigma);
  EXPECT_NEAR(at_sigma[0], std::exp(-0.5), 1e-12);

  // Between two waypoints the nearer kernel wins: at t = 0.8 the distance to
  // the first waypoint is 0.8, giving exp(-0.8^2 / (2 * 0.25^2)) = exp(-5.12).
  auto between = contouring_weights(waypoints, {0.8}, sigma);
  EXPECT_NEAR(between[0], std::exp(-5.12), 1e-12);

  // Weight decays monotonically with distance from an isolated waypoint.
  auto decay = contouring_weights({0.0}, {0.0, 0.1, 0.3, 0.9, 2.0}, sigma);
  for (size_t i = 1; i < decay.size(); ++i) EXPECT_LT(decay[i], decay[i - 1]);

  EXPECT_THROW(contouring_weights({}, {0.0}, sigma), EmptyTrajectory);
  EXPECT_THROW(contouring_weights(waypoints, {0.0}, 0.0), std::invalid_argument);
}

TEST(Planner, HoverPlanIsStationary) {
  const SystemParams p;
  const ControllerConfig tracker;
  const PlannerConfig cfg;
  Planner planner(p, tracker, cfg, linearize_hover(p), SolverSettings{});

  SparseReference ref;
  ref.times = {0.0};
  ref.positions = {Vec3(0, 0, 0)};
  const FullState x = hover_state(p, Vec3(0, 0, p.cable_length));

  const DenseReference plan = planner.plan(x, hover_input(p), ref, 0.0);
  ASSERT_EQ(plan.size(), static_cast<size_t>(cfg.horizon) + 1);
  EXPECT_DOUBLE_EQ(plan.start_time, 0.0);
  EXPECT_DOUBLE_EQ(plan.dt, tracker.dt);
  for (const Vec3& pos : plan.positions)
    EXPECT_LT(pos.cwiseAbs().maxCoeff(), 1e-3);
  for (const ControlInput& u : plan.inputs)
    EXPECT_LT((u - hover_input(p)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Planner, OpenLoopHoverStaysPut) {
  const SystemParams p;
  Planner planner(p, ControllerConfig{}, PlannerConfig{}, linearize_hover(p),
                  SolverSettings{});
  SparseReference ref;
  ref.times = {0.0};
  ref.positions = {Vec3(1, -1, 0.5)};
  const FullState x = hover_state(p, Vec3(1, -1, 0.5 + p.cable_length));

  const DenseReference plan = planner.plan_open_loop(x, hover_input(p), ref);
  for (const Vec3& pos : plan.positions)
    EXPECT_LT((pos - Vec3(1, -1, 0.5)).cwiseAbs().maxCoeff(), 1e-3);
}

// Independent mirror of the planner's problem with uniform stage weights;
// with a huge sigma the contouring weights degenerate to exactly that.
DenseReference uniform_weight_plan(const SystemParams& p, const ControllerConfig& tracker,
                                   const PlannerConfig& cfg, const SparseReference& ref,
                                   const FullState& x_abs, const ControlInput& u_prev,
                                   OcpSolution* raw = nullptr) {
  const LinearModel lin = linearize_hover(p);
  const IncrementalModel inc = incremental_model(lin, tracker.dt);
  const OutputMap out = output_map(p.cable_length);
  const TrackingWeights w{tracker.payload_weights, tracker.input_weights, cfg.rate_weights,
                          tracker.slack_weight,    tracker.velocity_bound, cfg.tilt_bound};

  const double t0 = ref.times.front();
  const double span = ref.times.back() - t0 + cfg.ol_tail;
  const int horizon = std::max(1, static_cast<int>(std::ceil(span / tracker.dt - 1e-9)));
  const size_t nn = static_cast<size_t>(horizon) + 1;

  FullState x_dev = x_abs;
  x_dev(sx::kThrust) -= hover_thrust(p);
  AugState x0;
  x0 << x_dev, u_prev - hover_input(p);

  std::vector<OutVec> targets(nn);
  for (size_t n = 0; n < nn; ++n) {
    const double tn = t0 + static_cast<double>(n) * tracker.dt;
    targets[n] << ref.sample_zoh(tn), Vec3::Zero();
  }
  const std::vector<double> omega(nn, 1.0);

  const OcpQp qp = build_tracking_ocp(x0, targets, w, omega, inc, out);
  OcpSolver solver;
  const OcpSolution sol = solver.solve(qp, SolverSettings{});
  EXPECT_EQ(sol.status, SolveStatus::Optimal);
  if (raw) *raw = sol;

  DenseReference plan;
  plan.start_time = t0;
  plan.dt = tracker.dt;
  plan.positions.resize(nn);
  plan.inputs.resize(nn);
  for (size_t n = 0; n < nn; ++n) {
    const OutVec y = out.C * sol.x[n] + out.d;
    plan.positions[n] = y.head<3>();
    plan.inputs[n] = sol.x[n].tail<kInputDim>() + hover_input(p);
  }
  return plan;
}

TEST(Planner, LargeSigmaMatchesUniformWeightPlan) {
  const SystemParams p;
  const ControllerConfig tracker;
  PlannerConfig cfg;
  cfg.sigma = 1e6;

  const SparseReference ref = square_trajectory(2.0);
  const FullState x = hover_state(p, ref.positions.front() + Vec3(0, 0, p.cable_length));
  const ControlInput u0 = hover_input(p);

  Planner planner(p, tracker, cfg, linearize_hover(p), SolverSettings{});
  const DenseReference faded = planner.plan_open_loop(x, u0, ref);

  OcpSolution raw;
  const DenseReference uniform = uniform_weight_plan(p, tracker, cfg, ref, x, u0, &raw);
  ASSERT_EQ(faded.size(), uniform.size());

  double gap = 0.0;
  for (size_t n = 0; n < faded.size(); ++n)
    gap = std::max(gap, (faded.positions[n] - uniform.positions[n]).cwiseAbs().maxCoeff());
  EXPECT_LT(gap, 1e-3);

  // The planner's soft corridor holds on this benign course: velocities and
  // tilt states of the mirrored solution stay inside their bounds.
  for (const Eigen::VectorXd& xa : raw.x) {
    EXPECT_LT(std::abs(xa(sx::kVx)), tracker.velocity_bound + 1e-3);
    EXPECT_LT(std::abs(xa(sx::kVy)), tracker.velocity_bound + 1e-3);
    EXPECT_LT(std::abs(xa(sx::kVz)), tracker.velocity_bound + 1e-3);
    EXPECT_LT(std::abs(xa(sx::kTheta)), cfg.tilt_bound + 1e-3);
    EXPECT_LT(std::abs(xa(sx::kPhi)), cfg.tilt_bound + 1e-3);
  }
}

TEST(Planner, SmallSigmaTightensWaypointHits) {
  const SystemParams p;
  const ControllerConfig tracker;
  const SparseReference ref = square_trajectory(2.0);
  const FullState x = hover_state(p, ref.positions.front() + Vec3(0, 0, p.cable_length));
  const ControlInput u0 = hover_input(p);

  auto total_miss = [&](double sigma) {
    PlannerConfig cfg;
    cfg.sigma = sigma;
    Planner planner(p, tracker, cfg, linearize_hover(p), SolverSettings{});
    const DenseReference plan = planner.plan_open_loop(x, u0, ref);
    double miss = 0.0;
    for (size_t i = 0; i < ref.size(); ++i)
      miss += (plan.sample_position(ref.times[i]) - ref.positions[i]).norm();
    return miss;
  };

  EXPECT_LT(total_miss(0.05), total_miss(0.5));
}

TEST(Planner, PlansAreDeterministic) {
  const SystemParams p;
  const ControllerConfig tracker;
  const PlannerConfig cfg;
  const SparseReference ref = square_trajectory(2.0);
  const FullState x = hover_state(p, ref.positions.front() + Vec3(0, 0, p.cable_length));

  Planner a(p, tracker, cfg, linearize_hover(p), SolverSettings{});
  Planner b(p, tracker, cfg, linearize_hover(p), SolverSettings{});
  const DenseReference pa = a.plan(x, hover_input(p), ref, 0.0);
  const DenseReference pb = b.plan(x, hover_input(p), ref, 0.0);
  ASSERT_EQ(pa.size(), pb.size());
  for (size_t n = 0; n < pa.size(); ++n) {
    EXPECT_EQ((pa.positions[n] - pb.positions[n]).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((pa.inputs[n] - pb.inputs[n]).cwiseAbs().maxCoeff(), 0.0);
  }
}

}  // namespace
}  // namespace payload_mpc
