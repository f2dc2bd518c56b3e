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

#include "payload_mpc/ocp.hpp"

namespace payload_mpc {

// Partial condensation: groups consecutive stages into blocks, eliminating
// the intermediate states so each block becomes one stage whose input stacks
// the block's inputs.  Trades the horizon length against stage size; with
// block size >= N the problem becomes a single dense stage.  The transform
// is exact: solutions of the condensed problem expand to solutions of the
// original one.

/// Recovery data for one original stage: x_k = M x_block + N U_block,
/// u_k = U_block.segment(input_offset, nu).
struct CondensedStageMap {
  int block = 0;
  Eigen::MatrixXd M, N;
  Eigen::Index input_offset = 0, nu = 0;
};

struct CondenseMap {
  std::vector<CondensedStageMap> per_stage;  // size = original N (+ terminal passthrough)
  Eigen::Index blocks = 0;
};

/// Groups stages into blocks of `block_size`.  The terminal node passes
/// through unchanged.
inline OcpQp condense_qp(const OcpQp& qp, Eigen::Index block_size, CondenseMap& map) {
  qp.validate();
  const Eigen::Index n = qp.horizon();
  if (block_size < 1) throw DimensionMismatch("condense_qp: block size must be >= 1");

  OcpQp out;
  out.x0 = qp.x0;
  map.per_stage.assign(n, CondensedStageMap());
  map.blocks = 0;

  for (Eigen::Index k0 = 0; k0 < n; k0 += block_size) {
    const Eigen::Index len = std::min(block_size, n - k0);
    const Eigen::Index nxb = qp.stages[k0].nx();
    Eigen::Index nu_total = 0;
    for (Eigen::Index k = 0; k < len; ++k) nu_total += qp.stages[k0 + k].nu();

    OcpStage blk;
    blk.Q = Eigen::MatrixXd::Zero(nxb, nxb);
    blk.R = Eigen::MatrixXd::Zero(nu_total, nu_total);
    blk.S = Eigen::MatrixXd::Zero(nu_total, nxb);
    blk.q = Eigen::VectorXd::Zero(nxb);
    blk.r = Eigen::VectorXd::Zero(nu_total);

    Eigen::Index rows_total = 0;
    for (Eigen::Index k = 0; k < len; ++k) rows_total += qp.stages[k0 + k].bound_rows();
    blk.G = Eigen::MatrixXd::Zero(rows_total, nu_total + nxb);
    blk.lb.resize(rows_total);
    blk.ub.resize(rows_total);
    blk.zl.resize(rows_total);
    blk.zu.resize(rows_total);

    // State transition within the block: x_{k0+k} = M x_{k0} + N U.
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(nxb, nxb);
    Eigen::MatrixXd nmat = Eigen::MatrixXd::Zero(nxb, nu_total);
    Eigen::Index off = 0, row_off = 0;
    for (Eigen::Index k = 0; k < len; ++k) {
      const OcpStage& s = qp.stages[k0 + k];
      const Eigen::Index nu_k = s.nu();
      const Eigen::MatrixXd cross = detail::stage_cross(s);
      const Eigen::VectorXd rlin = detail::stage_linear_u(s);

      CondensedStageMap& sm = map.per_stage[k0 + k];
      sm.block = static_cast<int>(map.blocks);
      sm.M = m;
      sm.N = nmat;
      sm.input_offset = off;
      sm.nu = nu_k;

      // Cost of stage k0+k in block coordinates.
      blk.Q += m.transpose() * s.Q * m;
      blk.q += m.transpose() * s.q;
      blk.S += nmat.transpose() * s.Q * m;
      blk.S.middleRows(off, nu_k) += cross * m;
      blk.R += nmat.transpose() * s.Q * nmat;
      blk.R.block(off, off, nu_k, nu_k) += s.R;
      blk.R.middleRows(off, nu_k) += cross * nmat;
      blk.R.middleCols(off, nu_k) += (cross * nmat).transpose();
      blk.r += nmat.transpose() * s.q;
      blk.r.segment(off, nu_k) += rlin;

      // Constraint rows in block coordinates.
      Eigen::MatrixXd gu, gx;
      detail::constraint_blocks(s, gu, gx);
      const Eigen::Index nr = s.bound_rows();
      blk.G.block(row_off, 0, nr, nu_total) = gx * nmat;
      blk.G.block(row_off, off, nr, nu_k) += gu;
      blk.G.block(row_off, nu_total, nr, nxb) = gx * m;
      blk.lb.segment(row_off, nr) = s.lb;
      blk.ub.segment(row_off, nr) = s.ub;
      blk.zl.segment(row_off, nr) = s.zl;
      blk.zu.segment(row_off, nr) = s.zu;
      row_off += nr;

      // Advance the transition.
      nmat = (s.A * nmat).eval();
      nmat.middleCols(off, nu_k) += s.B;
      m = (s.A * m).eval();
      off += nu_k;
    }
    blk.A = m;
    blk.B = nmat;
    out.stages.push_back(std::move(blk));
    ++map.blocks;
  }

  out.stages.push_back(qp.stages.back());
  out.validate();
  return out;
}

/// Expands a condensed solution back onto the original problem, recomputing
/// slacks, multipliers and costates there.
inline OcpSolution expand_solution(const OcpQp& qp, const CondenseMap& map,
                                   const OcpSolution& csol) {
  const Eigen::Index n = qp.horizon();
  OcpSolution sol;
  sol.status = csol.status;
  sol.iterations = csol.iterations;
  sol.merit_trace = csol.merit_trace;
  sol.x.assign(n + 1, Eigen::VectorXd());
  sol.u.assign(n, Eigen::VectorXd());
  sol.slack_lower.assign(n + 1, Eigen::VectorXd());
  sol.slack_upper.assign(n + 1, Eigen::VectorXd());
  sol.mu.assign(n + 1, Eigen::VectorXd());

  for (Eigen::Index k = 0; k < n; ++k) {
    const CondensedStageMap& sm = map.per_stage[k];
    const Eigen::VectorXd& xb = csol.x[sm.block];
    const Eigen::VectorXd& ub = csol.u[sm.block];
    sol.x[k] = sm.M * xb + sm.N * ub;
    sol.u[k] = ub.segment(sm.input_offset, sm.nu);
  }
  sol.x[n] = csol.x.back();

  for (Eigen::Index k = 0; k <= n; ++k) {
    const OcpStage& s = qp.stages[k];
    const Eigen::VectorXd c =
        s.constraint_value(k < n ? sol.u[k] : Eigen::VectorXd(), sol.x[k]);
    optimal_slacks(s, c, sol.slack_lower[k], sol.slack_upper[k]);
    sol.mu[k].resize(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i)
      sol.mu[k](i) = std::min(s.zu(i), 1e12) * sol.slack_upper[k](i) -
                     std::min(s.zl(i), 1e12) * sol.slack_lower[k](i);
  }
  sol.costate = recover_costates(qp, sol.x, sol.u, sol.mu);
  sol.objective = ocp_objective(qp, sol.x, sol.u);
  sol.kkt = kkt_residual(qp, sol);
  return sol;
}

}  // namespace payload_mpc
