#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hkreg/estimator.hpp"
#include "hkreg/lattice.hpp"
#include "hkreg/variation.hpp"

namespace hkreg {

// ---------------------------------------------------------------------------
// Reproducible randomness.
//
// All simulation draws go through these helpers so that a fixed seed yields
// bit-identical streams regardless of platform or standard library: the
// distributions in <random> are implementation-defined, the raw engine is
// not.
// ---------------------------------------------------------------------------

// One step of the splitmix64 generator started at x; used to derive
// per-trial seeds as splitmix64(seed ^ trial_index).
std::uint64_t splitmix64(std::uint64_t x);

// Uniform on [0,1) with 53 random bits.
double uniform53(std::mt19937_64& rng);

// Standard normal via the Box-Muller transform over uniform53 draws.
double standard_gaussian(std::mt19937_64& rng);

// Threads to use for `jobs` independent tasks: `requested` if positive,
// else the HKFIT_THREADS environment variable if set, else the hardware
// concurrency; always clamped to [1, jobs].
int resolved_thread_count(int requested, int jobs);

// ---------------------------------------------------------------------------
// Test functions.
// ---------------------------------------------------------------------------

enum class TestFunctionTag {
  kAdditiveLinear,    // x1 + x2
  kTwoStep,           // 1{x1 >= 1/2} + 1{x2 >= 1/2}
  kNegCorner,         // -1{x1 >= 1/2, x2 >= 1/2}
  kCheckered,         // parity of the 3x3 block index, blocks [0,1/3,2/3]
  kOneJump,           // a1 * 1{jump <= x} + a0
  kCurrentStatusCdf,  // F0(x) = (x1^2 x2 + x1 x2^2) / 2
};

// A ground-truth regression function with exact evaluation, an exact
// anchored-indicator form when one exists, and its exact variation.
struct TestFunction {
  TestFunctionTag tag = TestFunctionTag::kAdditiveLinear;
  Point jump;          // one-jump location; empty otherwise
  double a1 = 0.0;     // one-jump height
  double a0 = 0.0;     // one-jump base level

  static TestFunction additive_linear();
  static TestFunction two_step();
  static TestFunction neg_corner();
  static TestFunction checkered();
  static TestFunction one_jump(Point x_star, double jump_height, double base);
  static TestFunction current_status_cdf();

  // Parse "additive-linear", "two-step", "neg-corner", "checkered",
  // "current-status-cdf". Throws std::invalid_argument on anything else.
  static TestFunction parse(const std::string& name);
  std::string name() const;

  int dim() const;
  double operator()(const Point& x) const;

  // True for the rectangular piecewise constant tags.
  bool piecewise_constant() const;

  // Exact anchored-indicator form. The checkered form is produced by
  // differencing its 3x3 block-value tensor rather than from hand-derived
  // coefficients. Throws std::logic_error when !piecewise_constant().
  RectPiecewiseFn anchored() const;

  // Exact anchored Hardy-Krause variation of the function.
  double oracle_variation() const;
};

// y_i = f(x_i) + sigma * xi_i with xi_i independent standard Gaussians from
// rng. Throws on sigma < 0, empty xs, or dimension mismatch.
Eigen::VectorXd generate_observations(const TestFunction& f,
                                      const std::vector<Point>& xs,
                                      double sigma, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Risk experiments.
// ---------------------------------------------------------------------------

// How the variation budget is chosen for budgeted estimators.
struct VPolicy {
  enum class Kind { kOracle, kMultipleOfOracle, kExplicit };
  Kind kind = Kind::kOracle;
  double value = 1.0;  // multiplier or explicit budget

  static VPolicy oracle();
  static VPolicy multiple_of_oracle(double m);
  static VPolicy explicit_value(double v);

  // The budget to use for f. Throws if the resolved budget is negative.
  double resolve(const TestFunction& f) const;
};

struct ExperimentSpec {
  TestFunction function;
  std::vector<LatticeGrid> grids;
  double sigma = 1.0;
  int trials = 20;
  EstimatorKind estimator = EstimatorKind::kHk;
  VPolicy v_policy;
  std::uint64_t seed = 0;
};

struct GridRisk {
  std::int64_t n = 0;
  double risk = 0.0;       // mean empirical loss over included trials
  double std_error = 0.0;  // standard error of that mean; 0 for one trial
  int trials_included = 0;
  int trials_excluded = 0;  // solver non-convergence
};

// OLS slopes of log risk against three sample-size regressors.
struct SlopeFit {
  bool computable = false;
  std::string reason;            // set when !computable
  double vs_log_n = 0.0;         // log r_n on log n
  double vs_log_n_over_logn = 0.0;   // on log(n / log n)
  double vs_log_n_over_logn2 = 0.0;  // on log(n / (log n)^2)
};

struct RiskReport {
  std::vector<GridRisk> grids;  // in spec order
  SlopeFit slopes;
  double budget = 0.0;  // resolved variation budget; +inf for plain EM
  int warnings = 0;     // total excluded trials
};

// OLS slope of ys on xs. Throws std::invalid_argument unless there are at
// least two points and the xs are not all equal.
double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys);

// Defaults tuned for experiment-scale solves: the certificate is loose
// enough to keep multi-grid runs fast while perturbing measured risks by
// well under the Monte Carlo noise.
SolverConfig simulation_solver_defaults();

// Runs `spec.trials` seeded fits per grid, averages empirical loss against
// the truth at the design points, and regresses log risk on the three
// regressors. Trial t on grid g (global index k = g * trials + t) uses an
// independent stream seeded with splitmix64(spec.seed ^ k), so results do
// not depend on the thread schedule. Non-converged trials are dropped from
// the averages and counted in warnings. Slopes require at least two grids
// with positive risk and distinct sizes.
RiskReport run_risk_experiment(const ExperimentSpec& spec,
                               const SolverConfig& cfg = simulation_solver_defaults(),
                               int threads = 0);

// ---------------------------------------------------------------------------
// Bivariate current status study.
// ---------------------------------------------------------------------------

struct CurrentStatusResult {
  FittedModel model;  // entirely monotone fit to the binary responses
  int n = 0;
  bool clamped = false;
  double mse_full = 0.0;      // against F0 on the 21x21 grid {i/20}^2
  double mse_interior = 0.0;  // restricted to [0.2, 0.8]^2 (13x13 points)
};

// Draws x_i uniform on [0,1]^2 and y_i Bernoulli(F0(x_i)) with
// F0(x) = (x1^2 x2 + x1 x2^2)/2, fits the entirely monotone least squares
// estimator, and reports mean squared error of its predictions against F0
// on a fixed evaluation grid. Per observation the stream yields x1, x2,
// then the Bernoulli uniform. With clamp, predictions are truncated to
// [0,1] before the errors are taken; the model itself is never altered.
CurrentStatusResult run_current_status(
    int n, std::uint64_t seed, bool clamp = false,
    const SolverConfig& cfg = simulation_solver_defaults());

}  // namespace hkreg
