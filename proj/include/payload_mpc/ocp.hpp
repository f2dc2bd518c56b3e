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
#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "payload_mpc/errors.hpp"

namespace payload_mpc {

/// Bound entries at or beyond this magnitude are treated as absent.
inline constexpr double kUnbounded = 1e20;

// Stage-structured quadratic program
//
//   minimize   sum_n  1/2 x_n' Q_n x_n + q_n' x_n + 1/2 u_n' R_n u_n
//                     + r_n' u_n + u_n' S_n x_n
//                     + 1/2 sl_n' Zl_n sl_n + 1/2 su_n' Zu_n su_n
//   subject to x_{n+1} = A_n x_n + B_n u_n,   x_0 given,
//              lb_n - sl_n <= G_n (u_n; x_n) <= ub_n + su_n,
//              sl_n, su_n >= 0,
//
// where G_n defaults to the identity selector on the stacked (input, state)
// vector.  Penalty entries >= kUnbounded make the corresponding side hard.

/// One stage of the problem.  The terminal stage has nu() == 0 and empty
/// dynamics.  S and r may be left empty (zero); G empty means box bounds on
/// the stacked (u, x) vector.
struct OcpStage {
  Eigen::MatrixXd Q;       // nx x nx, positive semidefinite
  Eigen::MatrixXd R;       // nu x nu, positive definite
  Eigen::MatrixXd S;       // nu x nx cross term, optional
  Eigen::VectorXd q;       // nx
  Eigen::VectorXd r;       // nu, optional
  Eigen::MatrixXd A;       // nx_next x nx (absent on terminal stage)
  Eigen::MatrixXd B;       // nx_next x nu
  Eigen::MatrixXd G;       // rows x (nu + nx), optional
  Eigen::VectorXd lb, ub;  // rows; entries may be +-kUnbounded
  Eigen::VectorXd zl, zu;  // rows; diagonal slack penalties, >= 0

  Eigen::Index nx() const { return Q.rows(); }
  Eigen::Index nu() const { return R.rows(); }
  Eigen::Index bound_rows() const { return lb.size(); }
  bool has_general_constraint() const { return G.size() > 0; }

  /// Constraint value c = G (u; x), with the implicit identity selector when
  /// G is empty.
  Eigen::VectorXd constraint_value(const Eigen::VectorXd& u, const Eigen::VectorXd& x) const {
    Eigen::VectorXd z(u.size() + x.size());
    z << u, x;
    if (has_general_constraint()) return G * z;
    return z;
  }

  /// A stage with nu inputs, nx states and fully open box bounds.
  static OcpStage unconstrained(Eigen::Index nu_dim, Eigen::Index nx_dim) {
    OcpStage s;
    s.Q = Eigen::MatrixXd::Zero(nx_dim, nx_dim);
    s.R = Eigen::MatrixXd::Zero(nu_dim, nu_dim);
    s.q = Eigen::VectorXd::Zero(nx_dim);
    const Eigen::Index rows = nu_dim + nx_dim;
    s.lb = Eigen::VectorXd::Constant(rows, -kUnbounded);
    s.ub = Eigen::VectorXd::Constant(rows, kUnbounded);
    s.zl = Eigen::VectorXd::Zero(rows);
    s.zu = Eigen::VectorXd::Zero(rows);
    return s;
  }
};

/// Full problem: initial state plus N stage nodes and a terminal node.
struct OcpQp {
  Eigen::VectorXd x0;
  std::vector<OcpStage> stages;  // size N + 1, last one terminal

  Eigen::Index horizon() const { return static_cast<Eigen::Index>(stages.size()) - 1; }

  void validate() const {
    if (stages.size() < 2)
      throw DimensionMismatch("OcpQp: need at least one stage plus a terminal node");
    if (x0.size() != stages.front().Q.rows())
      throw DimensionMismatch("OcpQp: x0 has " + std::to_string(x0.size()) +
                              " entries, stage 0 expects " +
                              std::to_string(stages.front().Q.rows()));
    for (size_t n = 0; n < stages.size(); ++n) {
      const OcpStage& s = stages[n];
      const std::string at = " at stage " + std::to_string(n);
      const bool terminal = (n + 1 == stages.size());
      if (s.Q.rows() != s.Q.cols()) throw DimensionMismatch("OcpQp: Q not square" + at);
      if (s.R.rows() != s.R.cols()) throw DimensionMismatch("OcpQp: R not square" + at);
      if (s.q.size() != s.nx()) throw DimensionMismatch("OcpQp: q size mismatch" + at);
      if (s.r.size() != 0 && s.r.size() != s.nu())
        throw DimensionMismatch("OcpQp: r size mismatch" + at);
      if (s.S.size() != 0 && (s.S.rows() != s.nu() || s.S.cols() != s.nx()))
        throw DimensionMismatch("OcpQp: S shape mismatch" + at);
      if (terminal) {
        if (s.nu() != 0) throw DimensionMismatch("OcpQp: terminal stage must have no input");
      } else {
        const OcpStage& next = stages[n + 1];
        if (s.A.rows() != next.nx() || s.A.cols() != s.nx())
          throw DimensionMismatch("OcpQp: A shape mismatch" + at);
        if (s.B.rows() != next.nx() || s.B.cols() != s.nu())
          throw DimensionMismatch("OcpQp: B shape mismatch" + at);
      }
      const Eigen::Index expect_rows =
          s.has_general_constraint() ? s.G.rows() : s.nu() + s.nx();
      if (s.has_general_constraint() && s.G.cols() != s.nu() + s.nx())
        throw DimensionMismatch("OcpQp: G column count mismatch" + at);
      if (s.lb.size() != expect_rows || s.ub.size() != expect_rows ||
          s.zl.size() != expect_rows || s.zu.size() != expect_rows)
        throw DimensionMismatch("OcpQp: bound/penalty row count mismatch" + at);
      for (Eigen::Index i = 0; i < s.lb.size(); ++i) {
        if (s.lb(i) > s.ub(i) && s.lb(i) > -kUnbounded && s.ub(i) < kUnbounded)
          throw DimensionMismatch("OcpQp: lb > ub" + at + ", row " + std::to_string(i));
        if (s.zl(i) < 0.0 || s.zu(i) < 0.0)
          throw DimensionMismatch("OcpQp: negative slack penalty" + at);
      }
    }
  }
};

enum class SolveStatus { Optimal, MaxIterations, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIterations: return "MaxIterations";
    default: return "Infeasible";
  }
}

/// Solver output.  Slacks, bound multipliers and costates are per stage;
/// merit_trace records the objective at accepted refinement steps.
struct OcpSolution {
  std::vector<Eigen::VectorXd> x;            // N + 1
  std::vector<Eigen::VectorXd> u;            // N
  std::vector<Eigen::VectorXd> slack_lower;  // N + 1, per bound row
  std::vector<Eigen::VectorXd> slack_upper;  // N + 1
  std::vector<Eigen::VectorXd> mu;           // N + 1, bound-row multipliers
  std::vector<Eigen::VectorXd> costate;      // N + 1
  SolveStatus status = SolveStatus::MaxIterations;
  double kkt = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> merit_trace;
};

namespace detail {

inline Eigen::VectorXd stage_linear_u(const OcpStage& s) {
  return s.r.size() ? s.r : Eigen::VectorXd::Zero(s.nu());
}

inline Eigen::MatrixXd stage_cross(const OcpStage& s) {
  return s.S.size() ? s.S : Eigen::MatrixXd::Zero(s.nu(), s.nx());
}

/// Splits a stage constraint matrix into input/state column blocks, honoring
/// the implicit identity selector.
inline void constraint_blocks(const OcpStage& s, Eigen::MatrixXd& gu, Eigen::MatrixXd& gx) {
  if (s.has_general_constraint()) {
    gu = s.G.leftCols(s.nu());
    gx = s.G.rightCols(s.nx());
  } else {
    gu = Eigen::MatrixXd::Zero(s.nu() + s.nx(), s.nu());
    gx = Eigen::MatrixXd::Zero(s.nu() + s.nx(), s.nx());
    gu.topRows(s.nu()).setIdentity();
    gx.bottomRows(s.nx()).setIdentity();
  }
}

}  // namespace detail

/// Optimal slacks for a given constraint value: the smallest non-negative
/// slack restoring feasibility.
inline void optimal_slacks(const OcpStage& s, const Eigen::VectorXd& c, Eigen::VectorXd& sl,
                           Eigen::VectorXd& su) {
  sl = (s.lb - c).cwiseMax(0.0);
  su = (c - s.ub).cwiseMax(0.0);
  // Open sides carry no slack.
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (s.lb(i) <= -kUnbounded) sl(i) = 0.0;
    if (s.ub(i) >= kUnbounded) su(i) = 0.0;
  }
}

/// Objective value of a primal trajectory with slacks at their optimum.
inline double ocp_objective(const OcpQp& qp, const std::vector<Eigen::VectorXd>& x,
                            const std::vector<Eigen::VectorXd>& u) {
  double obj = 0.0;
  for (size_t n = 0; n < qp.stages.size(); ++n) {
    const OcpStage& s = qp.stages[n];
    const bool terminal = (n + 1 == qp.stages.size());
    obj += 0.5 * x[n].dot(s.Q * x[n]) + s.q.dot(x[n]);
    if (!terminal) {
      obj += 0.5 * u[n].dot(s.R * u[n]) + detail::stage_linear_u(s).dot(u[n]);
      if (s.S.size()) obj += u[n].dot(s.S * x[n]);
    }
    const Eigen::VectorXd c = s.constraint_value(terminal ? Eigen::VectorXd() : u[n], x[n]);
    Eigen::VectorXd sl, su;
    optimal_slacks(s, c, sl, su);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      obj += 0.5 * std::min(s.zl(i), 1e12) * sl(i) * sl(i);
      obj += 0.5 * std::min(s.zu(i), 1e12) * su(i) * su(i);
    }
  }
  return obj;
}

/// Costates consistent with the state-stationarity rows, given primal values
/// and bound multipliers.  Used to complete hand-built solutions.
inline std::vector<Eigen::VectorXd> recover_costates(const OcpQp& qp,
                                                     const std::vector<Eigen::VectorXd>& x,
                                                     const std::vector<Eigen::VectorXd>& u,
                                                     const std::vector<Eigen::VectorXd>& mu) {
  const size_t nn = qp.stages.size();
  std::vector<Eigen::VectorXd> lam(nn);
  for (size_t k = nn; k-- > 0;) {
    const OcpStage& s = qp.stages[k];
    Eigen::MatrixXd gu, gx;
    detail::constraint_blocks(s, gu, gx);
    Eigen::VectorXd v = s.Q * x[k] + s.q + gx.transpose() * mu[k];
    if (k + 1 < nn) {
      v += detail::stage_cross(s).transpose() * u[k];
      v += s.A.transpose() * lam[k + 1];
    }
    lam[k] = v;
  }
  return lam;
}

/// Max-norm KKT residual of a candidate solution: stationarity in u and x,
/// dynamics and initial-condition feasibility, relaxed bound feasibility,
/// slack non-negativity and complementarity.  Multipliers are derived from
/// the stored slacks (mu = Zu su - Zl sl); costates are taken from the
/// solution or recovered when absent.
inline double kkt_residual(const OcpQp& qp, const OcpSolution& sol) {
  qp.validate();
  const size_t nn = qp.stages.size();
  if (sol.x.size() != nn || sol.u.size() + 1 != nn)
    throw DimensionMismatch("kkt_residual: trajectory length does not match problem");

  std::vector<Eigen::VectorXd> mu(nn);
  double res = 0.0;
  for (size_t n = 0; n < nn; ++n) {
    const OcpStage& s = qp.stages[n];
    const bool terminal = (n + 1 == nn);
    if (sol.x[n].size() != s.nx())
      throw DimensionMismatch("kkt_residual: state size mismatch at stage " + std::to_string(n));
    if (!terminal && sol.u[n].size() != s.nu())
      throw DimensionMismatch("kkt_residual: input size mismatch at stage " + std::to_string(n));

    const Eigen::VectorXd c =
        s.constraint_value(terminal ? Eigen::VectorXd() : sol.u[n], sol.x[n]);
    Eigen::VectorXd sl = sol.slack_lower.size() == nn ? sol.slack_lower[n] : Eigen::VectorXd();
    Eigen::VectorXd su = sol.slack_upper.size() == nn ? sol.slack_upper[n] : Eigen::VectorXd();
    if (sl.size() != c.size() || su.size() != c.size()) optimal_slacks(s, c, sl, su);

    mu[n].resize(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double zl = std::min(s.zl(i), 1e12), zu = std::min(s.zu(i), 1e12);
      mu[n](i) = zu * su(i) - zl * sl(i);
      // Slack feasibility and sign.
      res = std::max(res, -sl(i));
      res = std::max(res, -su(i));
      if (s.lb(i) > -kUnbounded) res = std::max(res, s.lb(i) - c(i) - sl(i));
      if (s.ub(i) < kUnbounded) res = std::max(res, c(i) - s.ub(i) - su(i));
      // Complementarity: slack active only at its own bound.
      if (s.lb(i) > -kUnbounded)
        res = std::max(res, std::abs(sl(i) * std::max(0.0, c(i) - s.lb(i))));
      if (s.ub(i) < kUnbounded)
        res = std::max(res, std::abs(su(i) * std::max(0.0, s.ub(i) - c(i))));
    }
  }

  const std::vector<Eigen::VectorXd> lam_local =
      sol.costate.size() == nn ? sol.costate : recover_costates(qp, sol.x, sol.u, mu);

  res = std::max(res, (sol.x[0] - qp.x0).cwiseAbs().maxCoeff());
  for (size_t n = 0; n < nn; ++n) {
    const OcpStage& s = qp.stages[n];
    const bool terminal = (n + 1 == nn);
    Eigen::MatrixXd gu, gx;
    detail::constraint_blocks(s, gu, gx);

    if (!terminal) {
      // Dynamics.
      const Eigen::VectorXd dyn = sol.x[n + 1] - s.A * sol.x[n] - s.B * sol.u[n];
      if (dyn.size()) res = std::max(res, dyn.cwiseAbs().maxCoeff());
      // Input stationarity.
      Eigen::VectorXd gu_res = s.R * sol.u[n] + detail::stage_linear_u(s) +
                               detail::stage_cross(s) * sol.x[n] + gu.transpose() * mu[n] +
                               s.B.transpose() * lam_local[n + 1];
      if (gu_res.size()) res = std::max(res, gu_res.cwiseAbs().maxCoeff());
    }
    // State stationarity (stage 0 is pinned by the initial condition).
    if (n > 0) {
      Eigen::VectorXd gxr = s.Q * sol.x[n] + s.q + gx.transpose() * mu[n] - lam_local[n];
      if (!terminal) {
        gxr += detail::stage_cross(s).transpose() * sol.u[n];
        gxr += s.A.transpose() * lam_local[n + 1];
      }
      res = std::max(res, gxr.cwiseAbs().maxCoeff());
    }
  }
  return res;
}

/// Shifts a receding-horizon solution by `steps` stages (warm start for the
/// next tick); the tail repeats the last entries.
inline OcpSolution shift_solution(const OcpSolution& sol, int steps = 1) {
  OcpSolution out = sol;
  if (steps <= 0 || sol.x.empty()) return out;
  auto shift = [&](std::vector<Eigen::VectorXd>& v) {
    if (v.empty()) return;
    const int n = static_cast<int>(v.size());
    for (int i = 0; i < n; ++i) v[i] = v[std::min(i + steps, n - 1)];
  };
  shift(out.x);
  shift(out.u);
  shift(out.slack_lower);
  shift(out.slack_upper);
  shift(out.mu);
  shift(out.costate);
  return out;
}

/// Plain-text dump for offline inspection.  Format: one `stage <n>` block per
/// node, then named matrices as `<name> <rows> <cols>` followed by rows of
/// space-separated entries (17 significant digits).
inline void dump_ocp(const OcpQp& qp, std::ostream& os) {
  const Eigen::IOFormat fmt(17, Eigen::DontAlignCols, " ", "\n", "", "", "", "");
  auto emit = [&](const char* name, const Eigen::MatrixXd& m) {
    os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    if (m.size()) os << m.format(fmt) << '\n';
  };
  os << "ocp " << qp.horizon() << '\n';
  emit("x0", qp.x0);
  for (size_t n = 0; n < qp.stages.size(); ++n) {
    const OcpStage& s = qp.stages[n];
    os << "stage " << n << '\n';
    emit("Q", s.Q);
    emit("R", s.R);
    emit("S", s.S);
    emit("q", s.q);
    emit("r", s.r);
    emit("A", s.A);
    emit("B", s.B);
    emit("G", s.G);
    emit("lb", s.lb);
    emit("ub", s.ub);
    emit("zl", s.zl);
    emit("zu", s.zu);
  }
}

}  // namespace payload_mpc
