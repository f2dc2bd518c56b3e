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

#include "payload_mpc/types.hpp"

namespace payload_mpc {

template <typename T>
Eigen::Matrix<T, 3, 3> rot_x(T angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle), s = sin(angle);
  Eigen::Matrix<T, 3, 3> r;
  r << T(1), T(0), T(0),
       T(0), c, -s,
       T(0), s, c;
  return r;
}

template <typename T>
Eigen::Matrix<T, 3, 3> rot_y(T angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle), s = sin(angle);
  Eigen::Matrix<T, 3, 3> r;
  r << c, T(0), s,
       T(0), T(1), T(0),
       -s, T(0), c;
  return r;
}

template <typename T>
Eigen::Matrix<T, 3, 3> rot_z(T angle) {
  using std::cos;
  using std::sin;
  const T c = cos(angle), s = sin(angle);
  Eigen::Matrix<T, 3, 3> r;
  r << c, -s, T(0),
       s, c, T(0),
       T(0), T(0), T(1);
  return r;
}

/// Body-to-world rotation, extrinsic x-y-z convention: R_z(psi) R_y(theta) R_x(phi).
inline Mat3 rot_body_to_world(double phi, double theta, double psi) {
  return rot_z(psi) * rot_y(theta) * rot_x(phi);
}

/// Cable-frame-to-world rotation: R_x(phi_l) R_y(theta_l).
inline Mat3 rot_load_to_world(double phi_l, double theta_l) {
  return rot_x(phi_l) * rot_y(theta_l);
}

/// Unit vector from the UAV toward the payload, expressed in world axes.
/// Equals R_x(phi_l) R_y(theta_l) (0, 0, -1)^T.
template <typename T>
Eigen::Matrix<T, 3, 1> cable_direction(T theta_l, T phi_l) {
  using std::cos;
  using std::sin;
  return Eigen::Matrix<T, 3, 1>(-sin(theta_l),
                                sin(phi_l) * cos(theta_l),
                                -cos(phi_l) * cos(theta_l));
}

/// Jacobian of cable_direction with respect to (theta_l, phi_l); 3x2.
template <typename T>
Eigen::Matrix<T, 3, 2> cable_direction_jacobian(T theta_l, T phi_l) {
  using std::cos;
  using std::sin;
  const T ct = cos(theta_l), st = sin(theta_l);
  const T cp = cos(phi_l), sp = sin(phi_l);
  Eigen::Matrix<T, 3, 2> j;
  j << -ct, T(0),
       -sp * st, cp * ct,
       cp * st, sp * ct;
  return j;
}

/// World position of the payload for a given UAV position and swing angles.
inline Vec3 payload_position(const Vec3& uav_position, double theta_l, double phi_l,
                             double cable_length) {
  return uav_position + cable_length * cable_direction(theta_l, phi_l);
}

/// World velocity of the payload.
inline Vec3 payload_velocity(const Vec3& uav_velocity, double theta_l, double phi_l,
                             double theta_l_rate, double phi_l_rate, double cable_length) {
  return uav_velocity + cable_length * cable_direction_jacobian(theta_l, phi_l) *
                            Vec2(theta_l_rate, phi_l_rate);
}

}  // namespace payload_mpc
