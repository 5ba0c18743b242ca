#pragma once

#include "hkreg/design.hpp"

namespace hkreg {

struct SolverConfig {
  int max_iter = 50000;
  double rel_tol = 1e-10;
  double kkt_tol = 1e-6;
  int lipschitz_power_iters = 50;
  bool restart = true;
};

// Constraint sets over the coefficient tail; index 0 is always free.
enum class ConstraintKind {
  kNonnegTail,        // beta_j >= 0 for j >= 1
  kL1BallTail,        // sum_{j>=1} |beta_j| <= budget
  kCappedSimplexTail  // beta_j >= 0 for j >= 1 and sum_{j>=1} beta_j <= budget
};

struct SolveResult {
  Eigen::VectorXd beta;
  double objective = 0.0;  // ||y - A beta||^2 at the returned beta
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Euclidean projections, in place, leaving v[0] untouched. Exact pivot-based
// thresholds; no approximate inner iterations.
void project_nonneg_except_first(Eigen::VectorXd& v);
void project_l1_ball_except_first(Eigen::VectorXd& v, double budget);
void project_capped_simplex_except_first(Eigen::VectorXd& v, double budget);

// Power iteration estimate of the largest eigenvalue of A^T A, inflated by
// 5 percent so it upper bounds the true value once the iteration settles.
// Deterministic start vector; returns 0 for a zero operator.
double estimate_lipschitz(const LinearOperator& a, int iters = 50);

// Projected gradient with momentum and restart on objective increase.
// Optimality is certified whenever the relative objective decrease over a
// 10 iteration window drops below rel_tol, and in any case at least every
// 250 iterations; the solve stops once the KKT residual is below kkt_tol,
// or at max_iter with converged=false. The objective never increases
// across iterations beyond floating point noise.
SolveResult solve_constrained_ls(const LinearOperator& a,
                                 const Eigen::VectorXd& y, ConstraintKind kind,
                                 double budget, const SolverConfig& cfg = {});

// Stationarity certificate at beta given g = A^T (A beta - y); the maximum
// violation across gradient, dual feasibility, and complementary slackness
// conditions for the constraint set. Exposed for tests and diagnostics.
double kkt_residual(const Eigen::VectorXd& beta, const Eigen::VectorXd& g,
                    ConstraintKind kind, double budget, double boundary_tol);

}  // namespace hkreg
