#pragma once

#include <vector>

#include "hkreg/design.hpp"
#include "hkreg/solver.hpp"
#include "hkreg/variation.hpp"

namespace hkreg {

enum class EstimatorKind { kEm, kHk, kEmCapped };

// How the working design is realized. kGrid solves over the smallest
// coordinate grid covering the design points through the implicit running-sum
// operator; kDense materializes the deduplicated indicator columns. Both
// reach the same fitted values. kAuto picks kGrid unless the covering grid
// is too large.
enum class FitBackend { kAuto, kGrid, kDense };

struct FittedModel {
  EstimatorKind kind = EstimatorKind::kEm;
  double budget = 0.0;      // variation cap; +inf when none applies
  RectPiecewiseFn fn;       // canonical anchored form, origin anchor first
  Eigen::VectorXd fitted;   // fn at the design points, input order
  SolveResult diagnostics;  // beta cleared to keep models lean
  bool lattice_design = false;  // rows covered the working grid exactly once
  LatticeGrid work_grid;
  Eigen::Index params = 0;  // columns of the representation that was solved
};

// Least squares projection onto the entirely monotone cone.
FittedModel fit_em(const std::vector<Point>& xs, const Eigen::VectorXd& y,
                   const SolverConfig& cfg = {},
                   FitBackend backend = FitBackend::kAuto);

// Least squares with the anchored Hardy-Krause variation capped at v.
FittedModel fit_hk(const std::vector<Point>& xs, const Eigen::VectorXd& y,
                   double v, const SolverConfig& cfg = {},
                   FitBackend backend = FitBackend::kAuto);

// Entirely monotone least squares with total jump mass capped at v.
FittedModel fit_em_capped(const std::vector<Point>& xs,
                          const Eigen::VectorXd& y, double v,
                          const SolverConfig& cfg = {},
                          FitBackend backend = FitBackend::kAuto);

// Evaluate the fitted function at a point.
double predict(const FittedModel& model, const Point& x);

// (1/n) sum of squared differences.
double empirical_loss(const Eigen::VectorXd& fitted,
                      const Eigen::VectorXd& truth);

}  // namespace hkreg
