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

#include <chrono>
#include <vector>

#include "payload_mpc/rng.hpp"
#include "payload_mpc/solver.hpp"

namespace payload_mpc {
namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double scale,
                              GaussianRng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

Eigen::MatrixXd random_spd(Eigen::Index n, GaussianRng& rng) {
  const Eigen::MatrixXd l = random_matrix(n, n, 0.5, rng);
  return l.transpose() * l + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

/// Strictly convex equality-constrained instance with no active bounds.
OcpQp random_unbounded_qp(GaussianRng& rng) {
  const Eigen::Index nx = 2 + static_cast<Eigen::Index>(rng.uniform() * 3.0);
  const Eigen::Index nu = 1 + static_cast<Eigen::Index>(rng.uniform() * 2.0);
  const int horizon = 2 + static_cast<int>(rng.uniform() * 9.0);

  OcpQp qp;
  qp.x0 = random_matrix(nx, 1, 1.0, rng);
  for (int n = 0; n <= horizon; ++n) {
    const bool terminal = (n == horizon);
    OcpStage s = OcpStage::unconstrained(terminal ? 0 : nu, nx);
    s.Q = random_spd(nx, rng);
    s.q = random_matrix(nx, 1, 1.0, rng);
    if (!terminal) {
      s.R = random_spd(nu, rng);
      if (rng.uniform() < 0.7) s.r = random_matrix(nu, 1, 1.0, rng);
      // Small cross term keeps the stage Hessian strictly convex.
      if (rng.uniform() < 0.5) s.S = random_matrix(nu, nx, 0.02, rng);
      s.A = random_matrix(nx, nx, 0.6, rng);
      s.B = random_matrix(nx, nu, 0.8, rng);
    }
    qp.stages.push_back(s);
  }
  return qp;
}

/// Independent oracle: assemble the full equality-constrained KKT system over
/// all states and inputs and solve it densely.
void solve_dense_kkt(const OcpQp& qp, std::vector<Eigen::VectorXd>& x,
                     std::vector<Eigen::VectorXd>& u) {
  const size_t nn = qp.stages.size();
  std::vector<Eigen::Index> xoff(nn), uoff(nn - 1);
  Eigen::Index nz = 0;
  for (size_t n = 0; n < nn; ++n) {
    xoff[n] = nz;
    nz += qp.stages[n].nx();
  }
  for (size_t n = 0; n + 1 < nn; ++n) {
    uoff[n] = nz;
    nz += qp.stages[n].nu();
  }
  Eigen::Index ne = qp.stages[0].nx();
  for (size_t n = 0; n + 1 < nn; ++n) ne += qp.stages[n + 1].nx();

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nz);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ne, nz);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ne);

  for (size_t n = 0; n < nn; ++n) {
    const OcpStage& s = qp.stages[n];
    h.block(xoff[n], xoff[n], s.nx(), s.nx()) += s.Q;
    g.segment(xoff[n], s.nx()) += s.q;
    if (n + 1 < nn) {
      h.block(uoff[n], uoff[n], s.nu(), s.nu()) += s.R;
      if (s.r.size()) g.segment(uoff[n], s.nu()) += s.r;
      if (s.S.size()) {
        h.block(uoff[n], xoff[n], s.nu(), s.nx()) += s.S;
        h.block(xoff[n], uoff[n], s.nx(), s.nu()) += s.S.transpose();
      }
    }
  }

  Eigen::Index row = 0;
  e.block(row, xoff[0], qp.stages[0].nx(), qp.stages[0].nx()).setIdentity();
  rhs.segment(row, qp.stages[0].nx()) = qp.x0;
  row += qp.stages[0].nx();
  for (size_t n = 0; n + 1 < nn; ++n) {
    const OcpStage& s = qp.stages[n];
    const Eigen::Index nx_next = qp.stages[n + 1].nx();
    e.block(row, xoff[n + 1], nx_next, nx_next).setIdentity();
    e.block(row, xoff[n], nx_next, s.nx()) = -s.A;
    e.block(row, uoff[n], nx_next, s.nu()) = -s.B;
    row += nx_next;
  }

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nz + ne, nz + ne);
  kkt.topLeftCorner(nz, nz) = h;
  kkt.topRightCorner(nz, ne) = e.transpose();
  kkt.bottomLeftCorner(ne, nz) = e;
  Eigen::VectorXd full_rhs(nz + ne);
  full_rhs << -g, rhs;
  const Eigen::VectorXd z = kkt.partialPivLu().solve(full_rhs);

  x.resize(nn);
  u.resize(nn - 1);
  for (size_t n = 0; n < nn; ++n) x[n] = z.segment(xoff[n], qp.stages[n].nx());
  for (size_t n = 0; n + 1 < nn; ++n) u[n] = z.segment(uoff[n], qp.stages[n].nu());
}

double primal_gap(const OcpSolution& sol, const std::vector<Eigen::VectorXd>& x,
                  const std::vector<Eigen::VectorXd>& u) {
  double gap = 0.0;
  for (size_t n = 0; n < x.size(); ++n)
    gap = std::max(gap, (sol.x[n] - x[n]).cwiseAbs().maxCoeff());
  for (size_t n = 0; n < u.size(); ++n)
    if (u[n].size()) gap = std::max(gap, (sol.u[n] - u[n]).cwiseAbs().maxCoeff());
  return gap;
}

TEST(Solver, MatchesDenseKktOracleOnRandomInstances) {
  GaussianRng rng(101);
  SolverSettings settings;
  settings.tolerance = 1e-8;
  settings.max_iterations = 2000;
  OcpSolver solver;

  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    const OcpQp qp = random_unbounded_qp(rng);
    std::vector<Eigen::VectorXd> x_ref, u_ref;
    solve_dense_kkt(qp, x_ref, u_ref);

    const OcpSolution sol = solver.solve(qp, settings);
    EXPECT_EQ(sol.status, SolveStatus::Optimal) << "trial " << trial;
    EXPECT_LT(sol.kkt, 1e-6) << "trial " << trial;
    EXPECT_LT(primal_gap(sol, x_ref, u_ref), 1e-6) << "trial " << trial;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(elapsed, 60.0);
}

// Double-integrator LQR against a hand-coded backward Riccati recursion.
TEST(Solver, MatchesRiccatiRecursionOnLqr) {
  const double dt = 0.1;
  const int horizon = 20;
  Eigen::MatrixXd a(2, 2), b(2, 1);
  a << 1.0, dt, 0.0, 1.0;
  b << 0.5 * dt * dt, dt;
  Eigen::MatrixXd q(2, 2);
  q << 1.0, 0.0, 0.0, 0.1;
  Eigen::MatrixXd r(1, 1);
  r << 0.01;

  OcpQp qp;
  qp.x0 = Eigen::VectorXd(2);
  qp.x0 << 1.0, -0.5;
  for (int n = 0; n < horizon; ++n) {
    OcpStage s = OcpStage::unconstrained(1, 2);
    s.Q = q;
    s.R = r;
    s.A = a;
    s.B = b;
    qp.stages.push_back(s);
  }
  OcpStage terminal = OcpStage::unconstrained(0, 2);
  terminal.Q = q;
  qp.stages.push_back(terminal);

  // Backward pass.
  std::vector<Eigen::MatrixXd> gain(horizon);
  Eigen::MatrixXd p = q;
  for (int n = horizon - 1; n >= 0; --n) {
    const Eigen::MatrixXd bpb = r + b.transpose() * p * b;
    gain[n] = bpb.ldlt().solve(b.transpose() * p * a);
    p = q + a.transpose() * p * (a - b * gain[n]);
  }
  // Forward rollout.
  std::vector<Eigen::VectorXd> x_ref(horizon + 1), u_ref(horizon);
  x_ref[0] = qp.x0;
  for (int n = 0; n < horizon; ++n) {
    u_ref[n] = -gain[n] * x_ref[n];
    x_ref[n + 1] = a * x_ref[n] + b * u_ref[n];
  }

  SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 2000;
  OcpSolver solver;
  const OcpSolution sol = solver.solve(qp, settings);
  EXPECT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_LT(primal_gap(sol, x_ref, u_ref), 1e-6);
}

// Soft upper bound with closed-form optimum: min 1/2 u^2 - 3u + 5 su^2
// s.t. u - su <= 1 gives u* = 13/11 and su* = 2/11.
TEST(Solver, SoftBoundMatchesClosedForm) {
  OcpQp qp;
  qp.x0 = Eigen::VectorXd::Zero(1);
  OcpStage s0 = OcpStage::unconstrained(1, 1);
  s0.R = Eigen::MatrixXd::Identity(1, 1);
  s0.r = Eigen::VectorXd(1);
  s0.r << -3.0;
  s0.A = Eigen::MatrixXd::Identity(1, 1);
  s0.B = Eigen::MatrixXd::Zero(1, 1);
  s0.ub(0) = 1.0;   // row 0 covers the input
  s0.zu(0) = 10.0;  // finite penalty: soft
  qp.stages = {s0, OcpStage::unconstrained(0, 1)};

  OcpSolver solver;
  SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 2000;
  const OcpSolution sol = solver.solve(qp, settings);
  EXPECT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.u[0](0), 13.0 / 11.0, 1e-6);
  EXPECT_NEAR(sol.slack_upper[0](0), 2.0 / 11.0, 1e-6);
  EXPECT_LT(kkt_residual(qp, sol), 1e-6);
}

TEST(Solver, HardBoundClampsExactly) {
  OcpQp qp;
  qp.x0 = Eigen::VectorXd::Zero(1);
  OcpStage s0 = OcpStage::unconstrained(1, 1);
  s0.R = Eigen::MatrixXd::Identity(1, 1);
  s0.r = Eigen::VectorXd(1);
  s0.r << -3.0;
  s0.A = Eigen::MatrixXd::Identity(1, 1);
  s0.B = Eigen::MatrixXd::Zero(1, 1);
  s0.ub(0) = 1.0;
  s0.zu(0) = kUnbounded;  // penalty at the threshold: hard side
  qp.stages = {s0, OcpStage::unconstrained(0, 1)};

  OcpSolver solver;
  SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 2000;
  const OcpSolution sol = solver.solve(qp, settings);
  EXPECT_NEAR(sol.u[0](0), 1.0, 1e-6);
  EXPECT_NEAR(sol.objective, 0.5 - 3.0, 1e-6);
}

TEST(Solver, WarmStartReducesIterations) {
  GaussianRng rng(211);
  SolverSettings settings;
  settings.tolerance = 1e-8;
  settings.max_iterations = 2000;
  OcpSolver solver;

  long cold_total = 0, warm_total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const OcpQp qp = random_unbounded_qp(rng);
    const OcpSolution cold = solver.solve(qp, settings);
    const OcpSolution warm = solver.solve(qp, settings, &cold);
    EXPECT_EQ(warm.status, SolveStatus::Optimal);
    EXPECT_LT((warm.x[0] - cold.x[0]).cwiseAbs().maxCoeff(), 1e-5);
    cold_total += cold.iterations;
    warm_total += warm.iterations;
  }
  EXPECT_LT(warm_total, cold_total);
}

TEST(Solver, SolutionInvariantUnderCostScaling) {
  GaussianRng rng(307);
  const OcpQp qp = random_unbounded_qp(rng);
  OcpQp scaled = qp;
  for (OcpStage& s : scaled.stages) {
    s.Q *= 7.3;
    s.q *= 7.3;
    if (s.R.size()) s.R *= 7.3;
    if (s.r.size()) s.r *= 7.3;
    if (s.S.size()) s.S *= 7.3;
  }

  SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 2000;
  OcpSolver solver;
  const OcpSolution base = solver.solve(qp, settings);
  const OcpSolution mult = solver.solve(scaled, settings);
  double gap = 0.0;
  for (size_t n = 0; n < base.x.size(); ++n)
    gap = std::max(gap, (base.x[n] - mult.x[n]).cwiseAbs().maxCoeff());
  EXPECT_LT(gap, 1e-6);
}

TEST(Solver, CondensedAndDirectAgree) {
  GaussianRng rng(401);
  SolverSettings direct;
  direct.tolerance = 1e-9;
  direct.max_iterations = 2000;
  SolverSettings condensed = direct;
  condensed.condense = true;
  condensed.condense_block = 3;

  for (int trial = 0; trial < 10; ++trial) {
    const OcpQp qp = random_unbounded_qp(rng);
    std::vector<Eigen::VectorXd> x_ref, u_ref;
    solve_dense_kkt(qp, x_ref, u_ref);

    OcpSolver solver;
    const OcpSolution a = solver.solve(qp, direct);
    const OcpSolution b = solver.solve(qp, condensed);
    EXPECT_LT(primal_gap(a, x_ref, u_ref), 1e-6) << "trial " << trial;
    EXPECT_LT(primal_gap(b, x_ref, u_ref), 1e-6) << "trial " << trial;
  }
}

TEST(Solver, MeritTraceIsNonIncreasing) {
  GaussianRng rng(503);
  const OcpQp qp = random_unbounded_qp(rng);
  OcpSolver solver;
  SolverSettings settings;
  settings.tolerance = 1e-10;
  settings.max_iterations = 2000;
  const OcpSolution sol = solver.solve(qp, settings);
  ASSERT_FALSE(sol.merit_trace.empty());
  for (size_t i = 1; i < sol.merit_trace.size(); ++i) {
    EXPECT_LE(sol.merit_trace[i],
              sol.merit_trace[i - 1] + 1e-8 * (1.0 + std::abs(sol.merit_trace[i - 1])))
        << "step " << i;
  }
}

}  // namespace
}  // namespace payload_mpc
