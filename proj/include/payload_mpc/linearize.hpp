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
#include <cmath>

#include "payload_mpc/dynamics.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

/// Analytic Jacobians of the nonlinear model about the hover equilibrium
/// (payload straight down, zero velocity, thrust balancing total weight).
/// Positions do not enter the dynamics, so the linearization is valid around
/// hover at any location.
inline LinearModel linearize_hover(const SystemParams& p) {
  LinearModel m;
  m.A.setZero();
  m.B.setZero();

  const double f_h = hover_thrust(p);
  const Vec5 q0 = Vec5::Zero();

  // qdot rows.
  m.A.block<5, 5>(0, 5).setIdentity();

  // qdd rows: at hover qdd = M0^{-1} (f(x) - D0 qd - g(q)), expanded to first
  // order.  Gravity depends on the swing angles, drag on the velocities, and
  // the applied force on the attitude-loop states.
  const Mat5 m0 = mass_matrix<double>(q0, p);
  const Mat5 d0 = damping_matrix(q0, p);
  const auto m0_llt = m0.llt();

  Eigen::Matrix<double, 5, 2> dg_dangles = Eigen::Matrix<double, 5, 2>::Zero();
  dg_dangles(3, 0) = p.payload_mass * p.gravity * p.cable_length;
  dg_dangles(4, 1) = p.payload_mass * p.gravity * p.cable_length;

  // d(thrust_world)/d(theta, phi, F) at theta = phi = 0, F = f_h:
  // world force = F (sin th cos ph, -sin ph, cos th cos ph).
  Eigen::Matrix<double, 5, 3> df_dxa = Eigen::Matrix<double, 5, 3>::Zero();
  df_dxa(0, 0) = f_h;
  df_dxa(1, 1) = -f_h;
  df_dxa(2, 2) = 1.0;

  m.A.block<5, 2>(5, 3) = -m0_llt.solve(dg_dangles);
  m.A.block<5, 5>(5, 5) = -m0_llt.solve(d0);
  m.A.block<5, 3>(5, 10) = m0_llt.solve(df_dxa);

  // Attitude-loop rows.
  m.A.block<3, 3>(10, 10) = (-p.fcu_tau.cwiseInverse()).asDiagonal();
  m.B.block<3, 3>(10, 0) = p.fcu_gain.cwiseQuotient(p.fcu_tau).asDiagonal();
  return m;
}

/// Forward-Euler discretization: Ad = I + dt A, Bd = dt B.  Used by the
/// estimator, whose step is short (0.01 s) and whose dt varies tick to tick.
inline DiscreteModel discretize(const LinearModel& m, double dt) {
  DiscreteModel d;
  d.A = Eigen::Matrix<double, kStateDim, kStateDim>::Identity() + dt * m.A;
  d.B = dt * m.B;
  d.dt = dt;
  return d;
}

namespace detail {

/// Matrix exponential by scaling and squaring over a Pade [6/6] approximant.
/// Adequate for the small, well-scaled matrices produced by discretize_zoh.
template <int N>
Eigen::Matrix<double, N, N> expm(Eigen::Matrix<double, N, N> m) {
  using Mat = Eigen::Matrix<double, N, N>;
  int squarings = 0;
  const double norm = m.template lpNorm<1>();
  if (norm > 0.5) {
    squarings = std::max(0, int(std::ceil(std::log2(norm / 0.5))));
    m /= std::pow(2.0, squarings);
  }
  static const double c[7] = {1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0,
                              1.0 / 15840.0, 1.0 / 665280.0};
  const Mat m2 = m * m;
  const Mat m4 = m2 * m2;
  const Mat u_even = c[0] * Mat::Identity() + c[2] * m2 + c[4] * m4;
  const Mat u_odd = m * (c[1] * Mat::Identity() + c[3] * m2 + c[5] * m4 + c[6] * m4 * m2);
  Mat e = (u_even - u_odd).partialPivLu().solve(Mat(u_even + u_odd));
  for (int i = 0; i < squarings; ++i) e = e * e;
  return e;
}

}  // namespace detail

/// Exact zero-order-hold discretization via the stacked-exponential identity
/// exp([[A, B], [0, 0]] dt) = [[Ad, Bd], [0, I]].  Used for the controller
/// and planner prediction models: over their multi-second horizons the
/// forward-Euler map feeds artificial energy into the undamped pendulum mode
/// (|1 + lambda dt| > 1), which the planner would exploit as free swing.
inline DiscreteModel discretize_zoh(const LinearModel& m, double dt) {
  constexpr int kExt = kStateDim + kInputDim;
  Eigen::Matrix<double, kExt, kExt> stacked = Eigen::Matrix<double, kExt, kExt>::Zero();
  stacked.topLeftCorner<kStateDim, kStateDim>() = m.A;
  stacked.topRightCorner<kStateDim, kInputDim>() = m.B;
  const Eigen::Matrix<double, kExt, kExt> e = detail::expm<kExt>(stacked * dt);
  DiscreteModel d;
  d.A = e.topLeftCorner<kStateDim, kStateDim>();
  d.B = e.topRightCorner<kStateDim, kInputDim>();
  d.dt = dt;
  return d;
}

}  // namespace payload_mpc
