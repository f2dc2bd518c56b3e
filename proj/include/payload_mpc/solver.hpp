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
#include <limits>
#include <vector>

#include "payload_mpc/condense.hpp"
#include "payload_mpc/ocp.hpp"
#include "payload_mpc/riccati.hpp"

namespace payload_mpc {

/// Solver tuning.  The defaults suit the receding-horizon problems built by
/// the controller and planner.
struct SolverSettings {
  double tolerance = 1e-6;   // KKT / residual target
  int max_iterations = 200;  // splitting iterations per solve
  double rho = 10.0;         // initial penalty of the splitting
  double alpha = 1.6;        // over-relaxation
  bool adaptive_rho = true;
  bool polish = true;          // exact active-pattern refinement
  int polish_interval = 25;    // attempt refinement every k splitting iterations
  int max_polish_patterns = 40;
  bool condense = false;       // partial condensation pre-pass
  Eigen::Index condense_block = 10;
};

/// Structured QP solver: operator splitting (penalized LQR step + slack
/// proximal step + multiplier update) over the stage-banded form, finished
/// by an exact refinement that iterates on the bound-activity pattern with a
/// merit line search.  Warm starts reuse the previous solution's primal
/// trajectory and bound multipliers.
class OcpSolver {
 public:
  OcpSolution solve(const OcpQp& qp, const SolverSettings& settings,
                    const OcpSolution* warm = nullptr) {
    qp.validate();
    if (settings.condense && settings.condense_block > 1 && qp.horizon() > 1) {
      SolverSettings inner = settings;
      inner.condense = false;
      CondenseMap map;
      const OcpQp cqp = condense_qp(qp, settings.condense_block, map);
      OcpSolution cwarm;
      const bool have_warm = warm && make_condensed_warm(qp, map, cqp, *warm, cwarm);
      OcpSolver inner_solver;
      const OcpSolution csol = inner_solver.solve(cqp, inner, have_warm ? &cwarm : nullptr);
      OcpSolution sol = expand_solution(qp, map, csol);
      sol.status = csol.status;
      if (sol.kkt <= settings.tolerance) sol.status = SolveStatus::Optimal;
      return sol;
    }
    return solve_direct(qp, settings, warm);
  }

 private:
  struct RowSet {
    Eigen::MatrixXd gu, gx;           // active rows only
    Eigen::VectorXd lb, ub, zl, zu;   // clamped penalties
    std::vector<Eigen::Index> rows;   // original row indices
    Eigen::Index nr = 0;
  };
  enum class Side : char { Free, Lower, Upper };

  std::vector<RowSet> rows_;
  std::vector<LqrStage> base_, work_;
  RiccatiFactorization riccati_;

  static bool make_condensed_warm(const OcpQp& qp, const CondenseMap& map, const OcpQp& cqp,
                                  const OcpSolution& warm, OcpSolution& out) {
    if (warm.x.size() != qp.stages.size() || warm.u.size() + 1 != qp.stages.size())
      return false;
    out = OcpSolution();
    out.x.assign(cqp.stages.size(), Eigen::VectorXd());
    out.u.assign(cqp.stages.size() - 1, Eigen::VectorXd());
    for (Eigen::Index k = 0; k < qp.horizon(); ++k) {
      const CondensedStageMap& sm = map.per_stage[k];
      if (out.x[sm.block].size() == 0) out.x[sm.block] = warm.x[k];
      if (out.u[sm.block].size() == 0)
        out.u[sm.block] = Eigen::VectorXd::Zero(cqp.stages[sm.block].nu());
      if (warm.u[k].size() != sm.nu) return false;
      out.u[sm.block].segment(sm.input_offset, sm.nu) = warm.u[k];
    }
    out.x.back() = warm.x.back();
    return true;
  }

  void build_rows(const OcpQp& qp) {
    const size_t nn = qp.stages.size();
    rows_.assign(nn, RowSet());
    for (size_t n = 0; n < nn; ++n) {
      const OcpStage& s = qp.stages[n];
      RowSet& rs = rows_[n];
      for (Eigen::Index i = 0; i < s.bound_rows(); ++i)
        if (s.lb(i) > -kUnbounded || s.ub(i) < kUnbounded) rs.rows.push_back(i);
      rs.nr = static_cast<Eigen::Index>(rs.rows.size());
      Eigen::MatrixXd gu, gx;
      detail::constraint_blocks(s, gu, gx);
      rs.gu.resize(rs.nr, s.nu());
      rs.gx.resize(rs.nr, s.nx());
      rs.lb.resize(rs.nr);
      rs.ub.resize(rs.nr);
      rs.zl.resize(rs.nr);
      rs.zu.resize(rs.nr);
      for (Eigen::Index j = 0; j < rs.nr; ++j) {
        const Eigen::Index i = rs.rows[j];
        rs.gu.row(j) = gu.row(i);
        rs.gx.row(j) = gx.row(i);
        rs.lb(j) = s.lb(i);
        rs.ub(j) = s.ub(i);
        rs.zl(j) = std::min(s.zl(i), 1e12);
        rs.zu(j) = std::min(s.zu(i), 1e12);
      }
    }
  }

  void build_base(const OcpQp& qp) {
    const size_t nn = qp.stages.size();
    base_.assign(nn, LqrStage());
    for (size_t n = 0; n < nn; ++n) {
      const OcpStage& s = qp.stages[n];
      LqrStage& b = base_[n];
      b.Q = s.Q;
      b.R = s.R;
      b.S = detail::stage_cross(s);
      b.q = s.q;
      b.r = detail::stage_linear_u(s);
      if (n + 1 < nn) {
        b.A = s.A;
        b.B = s.B;
      }
    }
  }

  void factor_with_penalty(const std::vector<Eigen::VectorXd>& weights, double reg = 0.0) {
    work_ = base_;
    for (size_t n = 0; n < work_.size(); ++n) {
      const RowSet& rs = rows_[n];
      if (rs.nr) {
        const Eigen::MatrixXd wgu = weights[n].asDiagonal() * rs.gu;
        const Eigen::MatrixXd wgx = weights[n].asDiagonal() * rs.gx;
        work_[n].R += rs.gu.transpose() * wgu;
        work_[n].S += rs.gu.transpose() * wgx;
        work_[n].Q += rs.gx.transpose() * wgx;
      }
      if (reg > 0.0) {
        work_[n].R += reg * Eigen::MatrixXd::Identity(work_[n].R.rows(), work_[n].R.cols());
        work_[n].Q += reg * Eigen::MatrixXd::Identity(work_[n].Q.rows(), work_[n].Q.cols());
      }
    }
    try {
      riccati_.factor(work_);
    } catch (const SolverFailed&) {
      if (reg > 0.0) throw;
      factor_with_penalty(weights, 1e-9);
    }
  }

  /// Linear terms enter through work_; solves the equality-constrained step.
  void lqr_solve(const OcpQp& qp, const std::vector<Eigen::VectorXd>& lin_w,
                 std::vector<Eigen::VectorXd>& x, std::vector<Eigen::VectorXd>& u,
                 std::vector<Eigen::VectorXd>& costate) {
    for (size_t n = 0; n < work_.size(); ++n) {
      work_[n].q = base_[n].q;
      work_[n].r = base_[n].r;
      const RowSet& rs = rows_[n];
      if (rs.nr && lin_w[n].size()) {
        work_[n].q += rs.gx.transpose() * lin_w[n];
        work_[n].r += rs.gu.transpose() * lin_w[n];
      }
    }
    riccati_.solve(work_, qp.x0, x, u, costate);
  }

  std::vector<Eigen::VectorXd> constraint_values(const std::vector<Eigen::VectorXd>& x,
                                                 const std::vector<Eigen::VectorXd>& u) const {
    const size_t nn = rows_.size();
    std::vector<Eigen::VectorXd> c(nn);
    for (size_t n = 0; n < nn; ++n) {
      const RowSet& rs = rows_[n];
      c[n] = rs.gx * x[n];
      if (n + 1 < nn && rs.nr && rs.gu.cols()) c[n] += rs.gu * u[n];
    }
    return c;
  }

  std::vector<std::vector<Side>> pattern_of(const std::vector<Eigen::VectorXd>& c) const {
    std::vector<std::vector<Side>> p(rows_.size());
    for (size_t n = 0; n < rows_.size(); ++n) {
      const RowSet& rs = rows_[n];
      p[n].assign(rs.nr, Side::Free);
      for (Eigen::Index j = 0; j < rs.nr; ++j) {
        if (c[n](j) < rs.lb(j) && rs.zl(j) > 0.0) p[n][j] = Side::Lower;
        else if (c[n](j) > rs.ub(j) && rs.zu(j) > 0.0) p[n][j] = Side::Upper;
      }
    }
    return p;
  }

  /// Exact refinement: repeatedly minimize the quadratic model of the current
  /// activity pattern, line-searched on the true piecewise-quadratic merit.
  /// Returns true when the pattern reproduces itself (exact optimum).
  bool polish(const OcpQp& qp, const SolverSettings& settings, std::vector<Eigen::VectorXd>& x,
              std::vector<Eigen::VectorXd>& u, std::vector<Eigen::VectorXd>& costate,
              double& merit, std::vector<double>& trace, int& iterations) {
    const size_t nn = qp.stages.size();
    std::vector<Eigen::VectorXd> weights(nn), lin(nn);
    for (int pass = 0; pass < settings.max_polish_patterns; ++pass) {
      ++iterations;
      const auto c = constraint_values(x, u);
      const auto pat = pattern_of(c);
      for (size_t n = 0; n < nn; ++n) {
        const RowSet& rs = rows_[n];
        weights[n].setZero(rs.nr);
        lin[n].setZero(rs.nr);
        for (Eigen::Index j = 0; j < rs.nr; ++j) {
          if (pat[n][j] == Side::Lower) {
            weights[n](j) = rs.zl(j);
            lin[n](j) = -rs.zl(j) * rs.lb(j);
          } else if (pat[n][j] == Side::Upper) {
            weights[n](j) = rs.zu(j);
            lin[n](j) = -rs.zu(j) * rs.ub(j);
          }
        }
      }
      factor_with_penalty(weights);
      std::vector<Eigen::VectorXd> xs, us, cs;
      lqr_solve(qp, lin, xs, us, cs);

      // Line search on the exact merit.
      double step = 1.0;
      bool accepted = false;
      std::vector<Eigen::VectorXd> xt(nn), ut(nn - 1);
      for (; step > 1e-10; step *= 0.5) {
        for (size_t n = 0; n < nn; ++n) x_blend(xt[n], x[n], xs[n], step);
        for (size_t n = 0; n + 1 < nn; ++n) x_blend(ut[n], u[n], us[n], step);
        const double m_try = ocp_objective(qp, xt, ut);
        if (m_try < merit - 1e-12 * (1.0 + std::abs(merit))) {
          x = xt;
          u = ut;
          merit = m_try;
          trace.push_back(merit);
          accepted = true;
          break;
        }
        if (step == 1.0 && m_try <= merit + 1e-9 * (1.0 + std::abs(merit))) {
          // Flat step: already at this pattern's optimum.
          x = xs;
          u = us;
          costate = cs;
          merit = std::min(merit, m_try);
          return pattern_of(constraint_values(x, u)) == pat;
        }
      }
      if (!accepted) return false;
      if (step == 1.0) {
        costate = cs;
        if (pattern_of(constraint_values(x, u)) == pat) return true;
      }
    }
    return false;
  }

  static void x_blend(Eigen::VectorXd& out, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      double t) {
    out = a + t * (b - a);
  }

  void finalize(const OcpQp& qp, OcpSolution& sol) const {
    const size_t nn = qp.stages.size();
    sol.slack_lower.assign(nn, Eigen::VectorXd());
    sol.slack_upper.assign(nn, Eigen::VectorXd());
    sol.mu.assign(nn, Eigen::VectorXd());
    for (size_t n = 0; n < nn; ++n) {
      const OcpStage& s = qp.stages[n];
      const Eigen::VectorXd c =
          s.constraint_value(n + 1 < nn ? sol.u[n] : Eigen::VectorXd(), sol.x[n]);
      optimal_slacks(s, c, sol.slack_lower[n], sol.slack_upper[n]);
      sol.mu[n].resize(c.size());
      for (Eigen::Index i = 0; i < c.size(); ++i)
        sol.mu[n](i) = std::min(s.zu(i), 1e12) * sol.slack_upper[n](i) -
                       std::min(s.zl(i), 1e12) * sol.slack_lower[n](i);
    }
    sol.costate = recover_costates(qp, sol.x, sol.u, sol.mu);
    sol.objective = ocp_objective(qp, sol.x, sol.u);
    sol.kkt = kkt_residual(qp, sol);
  }

  OcpSolution solve_direct(const OcpQp& qp, const SolverSettings& settings,
                           const OcpSolution* warm) {
    const size_t nn = qp.stages.size();
    build_rows(qp);
    build_base(qp);

    OcpSolution sol;
    std::vector<Eigen::VectorXd> x, u, costate;
    std::vector<Eigen::VectorXd> zero_w(nn);
    for (size_t n = 0; n < nn; ++n) zero_w[n] = Eigen::VectorXd::Zero(rows_[n].nr);

    // Initial trajectory: warm primal when shapes match, otherwise the
    // bound-free optimum.
    bool warm_ok = false;
    if (warm && warm->x.size() == nn && warm->u.size() + 1 == nn) {
      warm_ok = true;
      for (size_t n = 0; n < nn && warm_ok; ++n) {
        if (warm->x[n].size() != qp.stages[n].nx()) warm_ok = false;
        if (n + 1 < nn && warm->u[n].size() != qp.stages[n].nu()) warm_ok = false;
      }
      if (warm_ok) {
        x = warm->x;
        u = warm->u;
        x[0] = qp.x0;
      }
    }
    factor_with_penalty(zero_w);
    if (!warm_ok) {
      lqr_solve(qp, zero_w, x, u, costate);
    }

    double merit = ocp_objective(qp, x, u);
    sol.merit_trace.push_back(merit);

    // Fast path: exact refinement straight away.
    if (settings.polish &&
        polish(qp, settings, x, u, costate, merit, sol.merit_trace, sol.iterations)) {
      sol.x = x;
      sol.u = u;
      finalize(qp, sol);
      if (sol.kkt <= settings.tolerance) {
        sol.status = SolveStatus::Optimal;
        return sol;
      }
    }

    // Splitting iterations on the consensus form (trajectory vs bound values).
    double rho = settings.rho;
    std::vector<Eigen::VectorXd> v(nn), y(nn), lin(nn);
    {
      const auto c = constraint_values(x, u);
      for (size_t n = 0; n < nn; ++n) {
        v[n] = c[n].cwiseMax(rows_[n].lb).cwiseMin(rows_[n].ub);
        y[n] = Eigen::VectorXd::Zero(rows_[n].nr);
        if (warm_ok && warm->mu.size() == nn) {
          const RowSet& rs = rows_[n];
          if (warm->mu[n].size() >= rs.nr)
            for (Eigen::Index j = 0; j < rs.nr; ++j) y[n](j) = warm->mu[n](rs.rows[j]);
        }
      }
    }

    std::vector<Eigen::VectorXd> rho_w(nn);
    auto set_rho_weights = [&]() {
      for (size_t n = 0; n < nn; ++n)
        rho_w[n] = Eigen::VectorXd::Constant(rows_[n].nr, rho);
      factor_with_penalty(rho_w);
    };
    set_rho_weights();

    double best_merit = merit;
    std::vector<Eigen::VectorXd> best_x = x, best_u = u;

    for (int it = 0; it < settings.max_iterations; ++it) {
      ++sol.iterations;
      for (size_t n = 0; n < nn; ++n) lin[n] = y[n] - rho * v[n];
      lqr_solve(qp, lin, x, u, costate);

      const auto c = constraint_values(x, u);
      double r_prim = 0.0, r_dual = 0.0;
      for (size_t n = 0; n < nn; ++n) {
        const RowSet& rs = rows_[n];
        for (Eigen::Index j = 0; j < rs.nr; ++j) {
          const double ch = settings.alpha * c[n](j) + (1.0 - settings.alpha) * v[n](j);
          const double a = ch + y[n](j) / rho;
          double vn;
          if (a < rs.lb(j))
            vn = (rho * a + rs.zl(j) * rs.lb(j)) / (rho + rs.zl(j));
          else if (a > rs.ub(j))
            vn = (rho * a + rs.zu(j) * rs.ub(j)) / (rho + rs.zu(j));
          else
            vn = a;
          r_dual = std::max(r_dual, rho * std::abs(vn - v[n](j)));
          y[n](j) += rho * (ch - vn);
          v[n](j) = vn;
          r_prim = std::max(r_prim, std::abs(c[n](j) - vn));
        }
      }

      const double m_now = ocp_objective(qp, x, u);
      if (m_now < best_merit) {
        best_merit = m_now;
        best_x = x;
        best_u = u;
      }

      const bool converged = r_prim < settings.tolerance && r_dual < settings.tolerance;
      const bool try_polish =
          settings.polish && (converged || (it + 1) % settings.polish_interval == 0);
      if (try_polish) {
        double pm = m_now;
        std::vector<Eigen::VectorXd> px = x, pu = u, pc = costate;
        if (polish(qp, settings, px, pu, pc, pm, sol.merit_trace, sol.iterations) ||
            converged) {
          sol.x = px;
          sol.u = pu;
          finalize(qp, sol);
          if (sol.kkt <= settings.tolerance) {
            sol.status = SolveStatus::Optimal;
            return sol;
          }
        }
        set_rho_weights();  // restore splitting factorization
      } else if (converged) {
        sol.x = x;
        sol.u = u;
        finalize(qp, sol);
        sol.status =
            sol.kkt <= settings.tolerance ? SolveStatus::Optimal : SolveStatus::MaxIterations;
        return sol;
      }

      if (settings.adaptive_rho && (it + 1) % 10 == 0 && r_dual > 0.0 && r_prim > 0.0) {
        const double ratio = std::sqrt(r_prim / r_dual);
        if (ratio > 5.0 || ratio < 0.2) {
          rho = std::clamp(rho * ratio, 1e-6, 1e8);
          set_rho_weights();
        }
      }
    }

    // Best effort: refine the best iterate once more and report honestly.
    x = best_x;
    u = best_u;
    double bm = ocp_objective(qp, x, u);
    if (settings.polish)
      polish(qp, settings, x, u, costate, bm, sol.merit_trace, sol.iterations);
    sol.x = x;
    sol.u = u;
    finalize(qp, sol);
    sol.status =
        sol.kkt <= settings.tolerance ? SolveStatus::Optimal : SolveStatus::MaxIterations;
    return sol;
  }
};

}  // namespace payload_mpc
