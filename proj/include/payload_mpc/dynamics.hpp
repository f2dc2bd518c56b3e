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

#include <cmath>
#include <utility>

#include "payload_mpc/errors.hpp"
#include "payload_mpc/kinematics.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

// Lagrangian model of a multirotor with a point payload on a taut massless
// cable.  Generalized coordinates q = (x, y, z, theta_l, phi_l): UAV position
// plus the two swing angles.  The attitude loop is appended as three decoupled
// first-order channels so the full state has 13 entries (see types.hpp).

namespace detail {

template <typename T>
T square(T v) {
  return v * v;
}

}  // namespace detail

/// Mass matrix M(q), symmetric positive definite away from |theta_l| = pi/2.
/// Templated so complex-step differentiation can run through it in tests.
template <typename T>
Eigen::Matrix<T, 5, 5> mass_matrix(const Eigen::Matrix<T, 5, 1>& q, const SystemParams& p) {
  using std::cos;
  const T theta = q(3);
  const Eigen::Matrix<T, 3, 2> j = cable_direction_jacobian(theta, q(4));
  const T m_total(p.uav_mass + p.payload_mass);
  const T ml(p.payload_mass);
  const T l(p.cable_length);

  Eigen::Matrix<T, 5, 5> m = Eigen::Matrix<T, 5, 5>::Zero();
  m.template topLeftCorner<3, 3>() = m_total * Eigen::Matrix<T, 3, 3>::Identity();
  m.template topRightCorner<3, 2>() = ml * l * j;
  m.template bottomLeftCorner<2, 3>() = m.template topRightCorner<3, 2>().transpose();
  m(3, 3) = ml * l * l;
  m(4, 4) = ml * l * l * detail::square(cos(theta));
  return m;
}

/// Velocity-product (Coriolis/centrifugal) generalized force c(q, qd).
inline Vec5 coriolis_vector(const Vec5& q, const Vec5& qd, const SystemParams& p) {
  const double ct = std::cos(q(3)), st = std::sin(q(3));
  const double cp = std::cos(q(4)), sp = std::sin(q(4));
  const double td = qd(3), pd = qd(4);
  const double ml = p.payload_mass, l = p.cable_length;

  // Second derivatives of the cable direction with respect to the angles.
  const Vec3 p_tt(st, -sp * ct, cp * ct);
  const Vec3 p_tp(0.0, -cp * st, -sp * st);
  const Vec3 p_pp(0.0, -sp * ct, cp * ct);

  Vec5 c;
  c.head<3>() = ml * l * (p_tt * td * td + 2.0 * p_tp * td * pd + p_pp * pd * pd);
  c(3) = ml * l * l * ct * st * pd * pd;
  c(4) = -2.0 * ml * l * l * ct * st * td * pd;
  return c;
}

/// Gravity generalized force g(q).
inline Vec5 gravity_vector(const Vec5& q, const SystemParams& p) {
  const double ml = p.payload_mass, l = p.cable_length;
  Vec5 g = Vec5::Zero();
  g(2) = (p.uav_mass + p.payload_mass) * p.gravity;
  g(3) = ml * p.gravity * l * std::cos(q(4)) * std::sin(q(3));
  g(4) = ml * p.gravity * l * std::sin(q(4)) * std::cos(q(3));
  return g;
}

/// Linear drag mapped through the velocity Jacobians of the two bodies:
/// D(q) = d_uav V_uav^T V_uav + d_l V_l^T V_l with V_uav = [I 0] and
/// V_l = [I  l J].  This form makes qd^T D qd equal the dissipated power
/// d_uav |v_uav|^2 + d_l |v_l|^2, so the sign convention is fixed by physics.
inline Mat5 damping_matrix(const Vec5& q, const SystemParams& p) {
  const Eigen::Matrix<double, 3, 2> j = cable_direction_jacobian(q(3), q(4));
  const double l = p.cable_length;

  Mat5 d = Mat5::Zero();
  d.topLeftCorner<3, 3>() = (p.uav_drag + p.payload_drag) * Mat3::Identity();
  d.topRightCorner<3, 2>() = p.payload_drag * l * j;
  d.bottomLeftCorner<2, 3>() = d.topRightCorner<3, 2>().transpose();
  d(3, 3) = p.payload_drag * l * l;
  d(4, 4) = p.payload_drag * l * l * detail::square(std::cos(q(3)));
  return d;
}

/// Mass matrix and bias vector h = c + D qd + g of M(q) qdd + h = f.
/// Throws SingularConfiguration when theta_l is within kSingularityMargin of
/// +-pi/2, where the phi_l row of M vanishes.
inline std::pair<Mat5, Vec5> eom_terms(const Vec5& q, const Vec5& qd, const SystemParams& p) {
  if (std::abs(q(3)) >= M_PI / 2.0 - kSingularityMargin)
    throw SingularConfiguration("eom_terms: |theta_l| too close to pi/2");
  const Mat5 m = mass_matrix<double>(q, p);
  const Vec5 h = coriolis_vector(q, qd, p) + damping_matrix(q, p) * qd + gravity_vector(q, p);
  return {m, h};
}

/// Thrust force in world axes for attitude (theta, phi) at zero heading.
inline Vec3 thrust_world(double theta, double phi, double thrust) {
  return rot_body_to_world(phi, theta, 0.0) * Vec3(0.0, 0.0, thrust);
}

/// Attitude-loop dynamics: three decoupled first-order lags
/// xa_dot = (K u - xa) / tau, channel-wise.
inline Vec3 fcu_dynamics(const Vec3& xa, const ControlInput& u, const SystemParams& p) {
  return (p.fcu_gain.cwiseProduct(u) - xa).cwiseQuotient(p.fcu_tau);
}

/// Full nonlinear state derivative.
inline FullState nonlinear_dynamics(const FullState& x, const ControlInput& u,
                                    const SystemParams& p) {
  const Vec5 q = x.head<5>();
  const Vec5 qd = x.segment<5>(5);
  const Vec3 xa = x.tail<3>();

  const auto [m, h] = eom_terms(q, qd, p);

  Vec5 f = Vec5::Zero();
  f.head<3>() = thrust_world(xa(0), xa(1), xa(2));

  FullState xdot;
  xdot.head<5>() = qd;
  xdot.segment<5>(5) = m.llt().solve(f - h);
  xdot.tail<3>() = fcu_dynamics(xa, u, p);
  return xdot;
}

/// Kinetic energy of the two point masses.  Templated for complex-step tests;
/// uses transpose() (not dot()) so complex arguments are not conjugated.
template <typename T>
T kinetic_energy(const Eigen::Matrix<T, 5, 1>& q, const Eigen::Matrix<T, 5, 1>& qd,
                 const SystemParams& p) {
  const Eigen::Matrix<T, 5, 5> m = mass_matrix(q, p);
  return T(0.5) * (qd.transpose() * m * qd)(0, 0);
}

/// Gravitational potential energy, zero level at z = 0.
template <typename T>
T potential_energy(const Eigen::Matrix<T, 5, 1>& q, const SystemParams& p) {
  using std::cos;
  const T m_total(p.uav_mass + p.payload_mass);
  return T(p.gravity) *
         (m_total * q(2) - T(p.payload_mass * p.cable_length) * cos(q(3)) * cos(q(4)));
}

}  // namespace payload_mpc
