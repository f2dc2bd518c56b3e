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
#include <vector>

#include "payload_mpc/errors.hpp"

namespace payload_mpc {

/// Quadratic stage data for an equality-constrained LQR subproblem:
///   min sum 1/2 x'Qx + q'x + 1/2 u'Ru + r'u + u'Sx   s.t.  x+ = Ax + Bu.
/// The quadratic part is factored once; solves against new linear terms
/// (q, r) reuse the factorization.
struct LqrStage {
  Eigen::MatrixXd Q, R, S, A, B;
  Eigen::VectorXd q, r;
};

/// Backward Riccati sweep with cross terms.  Throws SolverFailed when a
/// Q_uu block is not positive definite.
class RiccatiFactorization {
 public:
  /// `stages` holds N stage nodes plus a terminal node (only Q, q used there).
  void factor(const std::vector<LqrStage>& stages) {
    const size_t nn = stages.size();
    if (nn < 2) throw DimensionMismatch("RiccatiFactorization: empty horizon");
    n_ = nn - 1;
    gain_.resize(n_);
    quu_llt_.resize(n_);
    qux_.resize(n_);
    value_.resize(nn);

    value_[n_] = stages[n_].Q;
    for (size_t k = n_; k-- > 0;) {
      const LqrStage& s = stages[k];
      const Eigen::MatrixXd bv = s.B.transpose() * value_[k + 1];
      Eigen::MatrixXd quu = s.R + bv * s.B;
      quu = 0.5 * (quu + quu.transpose()).eval();
      qux_[k] = bv * s.A;
      if (s.S.size()) qux_[k] += s.S;
      quu_llt_[k].compute(quu);
      if (quu_llt_[k].info() != Eigen::Success)
        throw SolverFailed("RiccatiFactorization: Q_uu not positive definite at stage " +
                           std::to_string(k));
      gain_[k] = -quu_llt_[k].solve(qux_[k]);
      Eigen::MatrixXd v = s.Q + s.A.transpose() * value_[k + 1] * s.A +
                          qux_[k].transpose() * gain_[k];
      value_[k] = 0.5 * (v + v.transpose()).eval();
    }
  }

  /// Solves for the optimal trajectory from x0 given the stages' linear
  /// terms.  Outputs states (N+1), inputs (N) and costates (N+1).
  void solve(const std::vector<LqrStage>& stages, const Eigen::VectorXd& x0,
             std::vector<Eigen::VectorXd>& x, std::vector<Eigen::VectorXd>& u,
             std::vector<Eigen::VectorXd>& costate) const {
    if (stages.size() != n_ + 1)
      throw DimensionMismatch("RiccatiFactorization: stage count changed since factor()");
    std::vector<Eigen::VectorXd> vvec(n_ + 1), ff(n_);
    vvec[n_] = stages[n_].q;
    for (size_t k = n_; k-- > 0;) {
      const LqrStage& s = stages[k];
      const Eigen::VectorXd qu = s.r + s.B.transpose() * vvec[k + 1];
      ff[k] = -quu_llt_[k].solve(qu);
      vvec[k] = s.q + s.A.transpose() * vvec[k + 1] + qux_[k].transpose() * ff[k];
    }
    x.assign(n_ + 1, Eigen::VectorXd());
    u.assign(n_, Eigen::VectorXd());
    costate.assign(n_ + 1, Eigen::VectorXd());
    x[0] = x0;
    for (size_t k = 0; k < n_; ++k) {
      u[k] = gain_[k] * x[k] + ff[k];
      costate[k] = value_[k] * x[k] + vvec[k];
      x[k + 1] = stages[k].A * x[k] + stages[k].B * u[k];
    }
    costate[n_] = value_[n_] * x[n_] + vvec[n_];
  }

  size_t horizon() const { return n_; }

 private:
  size_t n_ = 0;
  std::vector<Eigen::MatrixXd> gain_, qux_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> quu_llt_;
  std::vector<Eigen::MatrixXd> value_;
};

}  // namespace payload_mpc
