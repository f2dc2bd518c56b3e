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
#include <string>

#include "payload_mpc/errors.hpp"
#include "payload_mpc/linearize.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

// Linear Kalman filter over the hover-linearized model.  The mean is stored
// in deviation coordinates: positions and angles are absolute (hover can sit
// anywhere), thrust is measured relative to the hover thrust.
//
// The core predict/update steps are dimension-generic so that small
// hand-checked instances exercise exactly the code the 13-state filter runs.

/// Filter state: mean + covariance.
struct Estimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Process/measurement noise. Defaults follow the shipped configuration:
/// position (1, 1, 1), swing angles (30, 30), velocities (100, 100, 100),
/// swing rates (30, 30), attitude-loop states (1, 1, 1); R = 10 I.
struct NoiseConfig {
  Eigen::MatrixXd process;      // 13x13
  Eigen::MatrixXd measurement;  // 5x5

  NoiseConfig() {
    Eigen::Matrix<double, kStateDim, 1> q;
    q << 1, 1, 1, 30, 30, 100, 100, 100, 30, 30, 1, 1, 1;
    process = q.asDiagonal();
    measurement = 10.0 * Eigen::Matrix<double, kMeasDim, kMeasDim>::Identity();
  }
};

/// Selector of the measured states: UAV position and attitude-loop tilt.
inline Eigen::Matrix<double, kMeasDim, kStateDim> measurement_matrix() {
  Eigen::Matrix<double, kMeasDim, kStateDim> c =
      Eigen::Matrix<double, kMeasDim, kStateDim>::Zero();
  c(0, sx::kX) = 1.0;
  c(1, sx::kY) = 1.0;
  c(2, sx::kZ) = 1.0;
  c(3, sx::kTheta) = 1.0;
  c(4, sx::kPhi) = 1.0;
  return c;
}

/// Time update with explicit discrete matrices; cov <- Ad P Ad' + Qd.
inline Estimate kalman_predict(const Estimate& est, const Eigen::MatrixXd& ad,
                               const Eigen::MatrixXd& bd, const Eigen::VectorXd& u,
                               const Eigen::MatrixXd& qd) {
  if (ad.rows() != est.mean.size() || bd.rows() != est.mean.size() ||
      bd.cols() != u.size() || qd.rows() != est.mean.size())
    throw DimensionMismatch("kalman_predict: model dimensions do not match estimate");
  Estimate out;
  out.mean = ad * est.mean + bd * u;
  out.cov = ad * est.cov * ad.transpose() + qd;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Measurement update, Joseph form.  Throws IllConditionedInnovation when the
/// innovation covariance has condition number above 1e12.
inline Estimate kalman_update(const Estimate& est, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& c, const Eigen::MatrixXd& r) {
  const auto n = est.mean.size();
  if (c.cols() != n || c.rows() != y.size() || r.rows() != y.size() || r.cols() != y.size())
    throw DimensionMismatch("kalman_update: measurement dimensions do not match estimate");

  Eigen::MatrixXd s = c * est.cov * c.transpose() + r;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw IllConditionedInnovation("kalman_update: innovation covariance condition number " +
                                   std::to_string(lmin > 0.0 ? lmax / lmin : -1.0));

  // K = P C' S^{-1}, computed via a solve against the symmetric S.
  const Eigen::MatrixXd k = s.llt().solve(c * est.cov).transpose();

  Estimate out;
  out.mean = est.mean + k * (y - c * est.mean);
  const Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(n, n) - k * c;
  out.cov = ikc * est.cov * ikc.transpose() + k * r * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Time update for the 13-state filter: forward-Euler discretization at the
/// actual elapsed dt, process noise scaled linearly with dt.
inline Estimate predict(const Estimate& est, const ControlInput& u, double dt,
                        const LinearModel& model, const NoiseConfig& noise) {
  const DiscreteModel d = discretize(model, dt);
  return kalman_predict(est, d.A, d.B, u, dt * noise.process);
}

/// Measurement update for the 13-state filter (position + tilt measurement).
inline Estimate update(const Estimate& est, const Eigen::Matrix<double, kMeasDim, 1>& y,
                       const NoiseConfig& noise) {
  return kalman_update(est, y, measurement_matrix(), noise.measurement);
}

/// The unmeasured payload coordinates: (theta_l, phi_l, theta_l_rate, phi_l_rate).
inline Eigen::Vector4d estimate_payload_state(const Estimate& est) {
  return Eigen::Vector4d(est.mean(sx::kThetaL), est.mean(sx::kPhiL),
                         est.mean(sx::kThetaLRate), est.mean(sx::kPhiLRate));
}

}  // namespace payload_mpc
