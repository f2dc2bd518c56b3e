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
#include <stdexcept>

namespace payload_mpc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;

/// Full model state, 13 entries:
///   [0..2]  UAV position x, y, z (world, z up)
///   [3..4]  payload swing angles theta_l (pitch-like), phi_l (roll-like)
///   [5..9]  time derivatives of the first five entries
///   [10..11] attitude-loop pitch theta and roll phi
///   [12]    collective thrust force F
using FullState = Eigen::Matrix<double, 13, 1>;

/// Attitude/thrust command: (theta_ref, phi_ref, F_ref / K_F).
using ControlInput = Eigen::Vector3d;

constexpr int kStateDim = 13;
constexpr int kInputDim = 3;
constexpr int kMeasDim = 5;

/// Indices into FullState.
namespace sx {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kZ = 2;
inline constexpr int kThetaL = 3;
inline constexpr int kPhiL = 4;
inline constexpr int kVx = 5;
inline constexpr int kVy = 6;
inline constexpr int kVz = 7;
inline constexpr int kThetaLRate = 8;
inline constexpr int kPhiLRate = 9;
inline constexpr int kTheta = 10;
inline constexpr int kPhi = 11;
inline constexpr int kThrust = 12;
}  // namespace sx

/// Indices into ControlInput.
namespace su {
inline constexpr int kThetaCmd = 0;
inline constexpr int kPhiCmd = 1;
inline constexpr int kThrustCmd = 2;
}  // namespace su

/// Swing angles closer than this to +-pi/2 are rejected as singular.
inline constexpr double kSingularityMargin = 0.1;

/// Physical parameters of the vehicle, cable and attitude loop.
struct SystemParams {
  double uav_mass = 3.5;       // kg
  double payload_mass = 1.5;   // kg
  double cable_length = 2.0;   // m
  double payload_drag = 0.1;   // N s/m, acts on payload velocity
  double uav_drag = 0.1;       // N s/m, acts on UAV velocity
  double gravity = 9.81;       // m/s^2

  Vec3 fcu_gain{1.0, 1.0, 1.0};   // steady-state gain per channel
  Vec3 fcu_tau{0.2, 0.2, 0.05};   // time constant per channel, s

  void validate() const {
    if (!(uav_mass > 0.0) || !(payload_mass > 0.0))
      throw std::invalid_argument("SystemParams: masses must be positive");
    if (!(cable_length > 0.0))
      throw std::invalid_argument("SystemParams: cable_length must be positive");
    if (payload_drag < 0.0 || uav_drag < 0.0)
      throw std::invalid_argument("SystemParams: drag coefficients must be non-negative");
    if (!(gravity > 0.0))
      throw std::invalid_argument("SystemParams: gravity must be positive");
    if ((fcu_gain.array() <= 0.0).any() || (fcu_tau.array() <= 0.0).any())
      throw std::invalid_argument("SystemParams: attitude-loop gains and time constants must be positive");
  }
};

/// Thrust needed to hold the combined mass still.
inline double hover_thrust(const SystemParams& p) {
  return (p.uav_mass + p.payload_mass) * p.gravity;
}

/// Input that holds the system at hover (zero tilt, thrust channel at F_h / K_F).
inline ControlInput hover_input(const SystemParams& p) {
  return ControlInput(0.0, 0.0, hover_thrust(p) / p.fcu_gain(su::kThrustCmd));
}

/// State at hover over a given UAV position: payload hanging straight down, at rest.
inline FullState hover_state(const SystemParams& p, const Vec3& uav_position = Vec3::Zero()) {
  FullState x = FullState::Zero();
  x.head<3>() = uav_position;
  x(sx::kThrust) = hover_thrust(p);
  return x;
}

/// Continuous-time linearization xdot = A (x - x_h) + B (u - u_h).
struct LinearModel {
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, kInputDim> B;
};

/// Forward-Euler discretization of a LinearModel.
struct DiscreteModel {
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, kInputDim> B;
  double dt = 0.0;
};

}  // namespace payload_mpc
