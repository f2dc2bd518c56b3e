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
#include <unsupported/Eigen/MatrixFunctions>

#include "payload_mpc/estimator.hpp"
#include "payload_mpc/linearize.hpp"
#include "payload_mpc/rng.hpp"

namespace payload_mpc {
namespace {

TEST(Linearize, PositionRowsAreKinematicIdentity) {
  const LinearModel m = linearize_hover(SystemParams{});
  EXPECT_LT((m.A.block<5, 5>(0, 5) - Eigen::Matrix<double, 5, 5>::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-14);
  EXPECT_LT(m.A.block<5, 5>(0, 0).cwiseAbs().maxCoeff(), 1e-14);
  // Commands enter only through the attitude-loop rows.
  EXPECT_LT(m.B.topRows(10).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GT(m.B.bottomRows(3).cwiseAbs().maxCoeff(), 1.0);
}

// Independent oracle: central differences of the nonlinear dynamics at hover.
TEST(Linearize, MatchesFiniteDifferenceJacobianAtHover) {
  const SystemParams p;
  const LinearModel m = linearize_hover(p);
  const FullState x0 = hover_state(p);
  const ControlInput u0 = hover_input(p);
  const double h = 1e-6;

  for (int j = 0; j < kStateDim; ++j) {
    FullState xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    const FullState col =
        (nonlinear_dynamics(xp, u0, p) - nonlinear_dynamics(xm, u0, p)) / (2.0 * h);
    EXPECT_LT((col - m.A.col(j)).cwiseAbs().maxCoeff(), 1e-5) << "state column " << j;
  }
  for (int j = 0; j < kInputDim; ++j) {
    ControlInput up = u0, um = u0;
    up(j) += h;
    um(j) -= h;
    const FullState col =
        (nonlinear_dynamics(x0, up, p) - nonlinear_dynamics(x0, um, p)) / (2.0 * h);
    EXPECT_LT((col - m.B.col(j)).cwiseAbs().maxCoeff(), 1e-5) << "input column " << j;
  }
}

TEST(Linearize, EulerDiscretizationLimits) {
  const LinearModel m = linearize_hover(SystemParams{});
  const DiscreteModel d0 = discretize(m, 0.0);
  EXPECT_LT((d0.A - Eigen::Matrix<double, kStateDim, kStateDim>::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  EXPECT_LT(d0.B.cwiseAbs().maxCoeff(), 1e-15);

  LinearModel integrator;
  integrator.A.setZero();
  integrator.B.setZero();
  integrator.B(sx::kVx, 0) = 2.0;
  const DiscreteModel d1 = discretize(integrator, 0.25);
  EXPECT_LT((d1.A - Eigen::Matrix<double, kStateDim, kStateDim>::Identity())
                .cwiseAbs()
                .maxCoeff(),
            1e-15);
  EXPECT_NEAR(d1.B(sx::kVx, 0), 0.5, 1e-15);
}

// Oracle for the exact discretization: the stacked [A B; 0 0] exponential
// computed by Eigen's reference implementation.
TEST(Linearize, ZohMatchesReferenceMatrixExponential) {
  const LinearModel m = linearize_hover(SystemParams{});
  for (double dt : {0.01, 0.05, 0.2}) {
    Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(kStateDim + kInputDim, kStateDim + kInputDim);
    stacked.topLeftCorner(kStateDim, kStateDim) = m.A;
    stacked.topRightCorner(kStateDim, kInputDim) = m.B;
    const Eigen::MatrixXd e = (stacked * dt).exp();

    const DiscreteModel d = discretize_zoh(m, dt);
    EXPECT_LT((d.A - e.topLeftCorner(kStateDim, kStateDim)).cwiseAbs().maxCoeff(), 1e-9)
        << "dt=" << dt;
    EXPECT_LT((d.B - e.topRightCorner(kStateDim, kInputDim)).cwiseAbs().maxCoeff(), 1e-9)
        << "dt=" << dt;
  }
}

// The exact discretization obeys the semigroup property; forward Euler does not.
TEST(Linearize, ZohSemigroupProperty) {
  const LinearModel m = linearize_hover(SystemParams{});
  const double dt = 0.08;
  const DiscreteModel full = discretize_zoh(m, dt);
  const DiscreteModel half = discretize_zoh(m, dt / 2.0);
  EXPECT_LT((full.A - half.A * half.A).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((full.B - (half.A * half.B + half.B)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Linearize, EulerErrorIsSecondOrderInDt) {
  const LinearModel m = linearize_hover(SystemParams{});
  const double dt = 1e-3;
  const DiscreteModel euler = discretize(m, dt);
  const DiscreteModel zoh = discretize_zoh(m, dt);
  const double bound = 1.0 * (m.A * m.A).cwiseAbs().maxCoeff() * dt * dt;
  EXPECT_LT((euler.A - zoh.A).cwiseAbs().maxCoeff(), bound);
  EXPECT_GT((euler.A - zoh.A).cwiseAbs().maxCoeff(), 0.0);
}

// All thirteen states must be reconstructible from position and tilt alone.
TEST(Linearize, HoverModelIsObservable) {
  const LinearModel m = linearize_hover(SystemParams{});
  const Eigen::Matrix<double, kMeasDim, kStateDim> c = measurement_matrix();
  Eigen::MatrixXd obs(kMeasDim * kStateDim, kStateDim);
  Eigen::MatrixXd block = c;
  for (int i = 0; i < kStateDim; ++i) {
    obs.middleRows(i * kMeasDim, kMeasDim) = block;
    block = block * m.A;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(obs);
  EXPECT_EQ(lu.rank(), kStateDim);
}

}  // namespace
}  // namespace payload_mpc
