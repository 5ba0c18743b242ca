#include "hkreg/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace hkreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

int checkered_block(double c) {
  if (c < 1.0 / 3.0) return 0;
  if (c < 2.0 / 3.0) return 1;
  return 2;
}

// Block values of the checkered function on the 3x3 partition at thirds.
Tensor checkered_block_tensor() {
  LatticeGrid grid({3, 3});
  Eigen::VectorXd values(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) values[3 * i + j] = ((i + j) % 2 == 1) ? 1.0 : 0.0;
  return Tensor(std::move(grid), std::move(values));
}

void check_point_dim(const TestFunction& f, const Point& x) {
  if (static_cast<int>(x.size()) != f.dim())
    throw std::invalid_argument("test function: point dimension mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Randomness helpers.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform53(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_gaussian(std::mt19937_64& rng) {
  double u1 = uniform53(rng);
  while (u1 <= 0.0) u1 = uniform53(rng);
  const double u2 = uniform53(rng);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

int resolved_thread_count(int requested, int jobs) {
  if (jobs < 1) jobs = 1;
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("HKFIT_THREADS")) {
      char* end = nullptr;
      const long parsed = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && parsed > 0 && parsed < 1 << 20)
        threads = static_cast<int>(parsed);
    }
  }
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw > 0 ? static_cast<int>(hw) : 1;
  }
  return std::clamp(threads, 1, jobs);
}

// ---------------------------------------------------------------------------
// Test functions.
// ---------------------------------------------------------------------------

TestFunction TestFunction::additive_linear() {
  TestFunction f;
  f.tag = TestFunctionTag::kAdditiveLinear;
  return f;
}

TestFunction TestFunction::two_step() {
  TestFunction f;
  f.tag = TestFunctionTag::kTwoStep;
  return f;
}

TestFunction TestFunction::neg_corner() {
  TestFunction f;
  f.tag = TestFunctionTag::kNegCorner;
  return f;
}

TestFunction TestFunction::checkered() {
  TestFunction f;
  f.tag = TestFunctionTag::kCheckered;
  return f;
}

TestFunction TestFunction::one_jump(Point x_star, double jump_height,
                                    double base) {
  if (x_star.empty())
    throw std::invalid_argument("one_jump: empty jump location");
  for (double c : x_star)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("one_jump: jump location outside [0,1]^d");
  TestFunction f;
  f.tag = TestFunctionTag::kOneJump;
  f.jump = std::move(x_star);
  f.a1 = jump_height;
  f.a0 = base;
  return f;
}

TestFunction TestFunction::current_status_cdf() {
  TestFunction f;
  f.tag = TestFunctionTag::kCurrentStatusCdf;
  return f;
}

TestFunction TestFunction::parse(const std::string& name) {
  if (name == "additive-linear") return additive_linear();
  if (name == "two-step") return two_step();
  if (name == "neg-corner") return neg_corner();
  if (name == "checkered") return checkered();
  if (name == "current-status-cdf") return current_status_cdf();
  if (name == "one-jump")
    throw std::invalid_argument(
        "test function: one-jump needs explicit parameters");
  throw std::invalid_argument("test function: unknown name '" + name + "'");
}

std::string TestFunction::name() const {
  switch (tag) {
    case TestFunctionTag::kAdditiveLinear: return "additive-linear";
    case TestFunctionTag::kTwoStep: return "two-step";
    case TestFunctionTag::kNegCorner: return "neg-corner";
    case TestFunctionTag::kCheckered: return "checkered";
    case TestFunctionTag::kOneJump: return "one-jump";
    case TestFunctionTag::kCurrentStatusCdf: return "current-status-cdf";
  }
  return "unknown";
}

int TestFunction::dim() const {
  return tag == TestFunctionTag::kOneJump ? static_cast<int>(jump.size()) : 2;
}

double TestFunction::operator()(const Point& x) const {
  check_point_dim(*this, x);
  switch (tag) {
    case TestFunctionTag::kAdditiveLinear:
      return x[0] + x[1];
    case TestFunctionTag::kTwoStep:
      return (x[0] >= 0.5 ? 1.0 : 0.0) + (x[1] >= 0.5 ? 1.0 : 0.0);
    case TestFunctionTag::kNegCorner:
      return (x[0] >= 0.5 && x[1] >= 0.5) ? -1.0 : 0.0;
    case TestFunctionTag::kCheckered: {
      const int b = checkered_block(x[0]) + checkered_block(x[1]);
      return (b % 2 == 1) ? 1.0 : 0.0;
    }
    case TestFunctionTag::kOneJump:
      return a0 + (leq(jump, x) ? a1 : 0.0);
    case TestFunctionTag::kCurrentStatusCdf:
      return 0.5 * (x[0] * x[0] * x[1] + x[0] * x[1] * x[1]);
  }
  throw std::logic_error("test function: bad tag");
}

bool TestFunction::piecewise_constant() const {
  switch (tag) {
    case TestFunctionTag::kTwoStep:
    case TestFunctionTag::kNegCorner:
    case TestFunctionTag::kCheckered:
    case TestFunctionTag::kOneJump:
      return true;
    default:
      return false;
  }
}

RectPiecewiseFn TestFunction::anchored() const {
  switch (tag) {
    case TestFunctionTag::kTwoStep:
      return RectPiecewiseFn(2, {{0.0, 0.0}, {0.0, 0.5}, {0.5, 0.0}},
                             Eigen::Vector3d(0.0, 1.0, 1.0));
    case TestFunctionTag::kNegCorner:
      return RectPiecewiseFn(2, {{0.0, 0.0}, {0.5, 0.5}},
                             Eigen::Vector2d(0.0, -1.0));
    case TestFunctionTag::kCheckered: {
      // Difference the block-value tensor; the coefficient at block (i, j)
      // anchors at (i/3, j/3). Zero coefficients are dropped (the origin
      // stays as the intercept).
      const Tensor dt = difference(checkered_block_tensor());
      std::vector<Point> anchors;
      std::vector<double> coeffs;
      anchors.push_back({0.0, 0.0});
      coeffs.push_back(dt.values[0]);
      for (std::int64_t k = 1; k < 9; ++k) {
        if (dt.values[k] == 0.0) continue;
        const MultiIndex idx = dt.grid.unflat(k);
        anchors.push_back({idx[0] / 3.0, idx[1] / 3.0});
        coeffs.push_back(dt.values[k]);
      }
      return RectPiecewiseFn(
          2, std::move(anchors),
          Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                            static_cast<Eigen::Index>(coeffs.size())));
    }
    case TestFunctionTag::kOneJump: {
      const bool at_origin =
          std::all_of(jump.begin(), jump.end(), [](double c) { return c == 0.0; });
      const int d = dim();
      const Point origin(static_cast<std::size_t>(d), 0.0);
      if (at_origin) {
        Eigen::VectorXd c(1);
        c[0] = a0 + a1;
        return RectPiecewiseFn(d, {origin}, std::move(c));
      }
      Eigen::VectorXd c(2);
      c << a0, a1;
      return RectPiecewiseFn(d, {origin, jump}, std::move(c));
    }
    default:
      throw std::logic_error(
          "test function: no anchored form for a non piecewise constant tag");
  }
}

double TestFunction::oracle_variation() const {
  switch (tag) {
    case TestFunctionTag::kAdditiveLinear:
      return 2.0;  // entirely monotone, so f(1,1) - f(0,0)
    case TestFunctionTag::kTwoStep:
      return 2.0;
    case TestFunctionTag::kNegCorner:
      return 1.0;
    case TestFunctionTag::kCheckered:
      return 12.0;
    case TestFunctionTag::kOneJump: {
      const bool at_origin =
          std::all_of(jump.begin(), jump.end(), [](double c) { return c == 0.0; });
      return at_origin ? 0.0 : std::abs(a1);
    }
    case TestFunctionTag::kCurrentStatusCdf:
      return 1.0;  // a CDF is entirely monotone: F(1,1) - F(0,0)
  }
  throw std::logic_error("test function: bad tag");
}

Eigen::VectorXd generate_observations(const TestFunction& f,
                                      const std::vector<Point>& xs,
                                      double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0))
    throw std::invalid_argument("generate_observations: sigma must be >= 0");
  if (xs.empty())
    throw std::invalid_argument("generate_observations: empty design");
  Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = f(xs[i]) + sigma * standard_gaussian(rng);
  return y;
}

// ---------------------------------------------------------------------------
// Risk experiments.
// ---------------------------------------------------------------------------

VPolicy VPolicy::oracle() { return {Kind::kOracle, 1.0}; }

VPolicy VPolicy::multiple_of_oracle(double m) {
  return {Kind::kMultipleOfOracle, m};
}

VPolicy VPolicy::explicit_value(double v) { return {Kind::kExplicit, v}; }

double VPolicy::resolve(const TestFunction& f) const {
  double v = 0.0;
  switch (kind) {
    case Kind::kOracle: v = f.oracle_variation(); break;
    case Kind::kMultipleOfOracle: v = value * f.oracle_variation(); break;
    case Kind::kExplicit: v = value; break;
  }
  if (!(v >= 0.0))
    throw std::invalid_argument("variation budget must be >= 0");
  return v;
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("fit_slope: length mismatch");
  if (xs.size() < 2)
    throw std::invalid_argument("fit_slope: need at least two points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument("fit_slope: regressor values all equal");
  return sxy / sxx;
}

SolverConfig simulation_solver_defaults() {
  SolverConfig cfg;
  cfg.max_iter = 120000;
  cfg.kkt_tol = 1e-2;
  return cfg;
}

namespace {

struct TrialOutcome {
  double loss = kNan;
  bool converged = false;
};

FittedModel fit_for(EstimatorKind kind, const std::vector<Point>& xs,
                    const Eigen::VectorXd& y, double budget,
                    const SolverConfig& cfg) {
  switch (kind) {
    case EstimatorKind::kEm: return fit_em(xs, y, cfg);
    case EstimatorKind::kHk: return fit_hk(xs, y, budget, cfg);
    case EstimatorKind::kEmCapped: return fit_em_capped(xs, y, budget, cfg);
  }
  throw std::logic_error("unknown estimator kind");
}

SlopeFit compute_slopes(const std::vector<GridRisk>& grids) {
  SlopeFit s;
  if (grids.size() < 2) {
    s.reason = "need at least two grid sizes";
    return s;
  }
  std::vector<double> log_n, log_n_logn, log_n_logn2, log_r;
  for (const GridRisk& g : grids) {
    if (!(g.risk > 0.0) || !std::isfinite(g.risk)) {
      s.reason = g.trials_included == 0
                     ? "a grid has no converged trials"
                     : "risk is zero on some grid; log risk undefined";
      return s;
    }
    if (g.n < 2) {
      s.reason = "grid sizes must be at least 2";
      return s;
    }
    const double n = static_cast<double>(g.n);
    const double ln = std::log(n);
    log_n.push_back(ln);
    log_n_logn.push_back(std::log(n / ln));
    log_n_logn2.push_back(std::log(n / (ln * ln)));
    log_r.push_back(std::log(g.risk));
  }
  try {
    s.vs_log_n = fit_slope(log_n, log_r);
    s.vs_log_n_over_logn = fit_slope(log_n_logn, log_r);
    s.vs_log_n_over_logn2 = fit_slope(log_n_logn2, log_r);
  } catch (const std::invalid_argument&) {
    s.reason = "sample size regressors are degenerate";
    return s;
  }
  s.computable = true;
  return s;
}

}  // namespace

RiskReport run_risk_experiment(const ExperimentSpec& spec,
                               const SolverConfig& cfg, int threads) {
  if (spec.grids.empty())
    throw std::invalid_argument("run_risk_experiment: no grids");
  if (spec.trials < 1)
    throw std::invalid_argument("run_risk_experiment: trials must be >= 1");
  if (!(spec.sigma >= 0.0))
    throw std::invalid_argument("run_risk_experiment: sigma must be >= 0");
  for (const LatticeGrid& g : spec.grids) {
    if (g.dim() != spec.function.dim())
      throw std::invalid_argument(
          "run_risk_experiment: grid dimension does not match the function");
    if (g.size() < 1)
      throw std::invalid_argument("run_risk_experiment: empty grid");
  }

  const double budget = spec.estimator == EstimatorKind::kEm
                            ? kInf
                            : spec.v_policy.resolve(spec.function);

  const int n_grids = static_cast<int>(spec.grids.size());
  std::vector<std::vector<Point>> designs(spec.grids.size());
  std::vector<Eigen::VectorXd> truths(spec.grids.size());
  for (int g = 0; g < n_grids; ++g) {
    designs[g] = lattice_points(spec.grids[g]);
    Eigen::VectorXd t(static_cast<Eigen::Index>(designs[g].size()));
    for (std::size_t i = 0; i < designs[g].size(); ++i)
      t[static_cast<Eigen::Index>(i)] = spec.function(designs[g][i]);
    truths[g] = std::move(t);
  }

  const int total = n_grids * spec.trials;
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  auto worker = [&]() {
    try {
      for (;;) {
        const int k = next.fetch_add(1);
        if (k >= total) return;
        const int g = k / spec.trials;
        std::mt19937_64 rng(
            splitmix64(spec.seed ^ static_cast<std::uint64_t>(k)));
        const Eigen::VectorXd y =
            generate_observations(spec.function, designs[g], spec.sigma, rng);
        const FittedModel model =
            fit_for(spec.estimator, designs[g], y, budget, cfg);
        outcomes[static_cast<std::size_t>(k)] = {
            empirical_loss(model.fitted, truths[g]),
            model.diagnostics.converged};
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const int n_threads = resolved_thread_count(threads, total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  RiskReport report;
  report.budget = budget;
  report.grids.resize(spec.grids.size());
  for (int g = 0; g < n_grids; ++g) {
    GridRisk& gr = report.grids[static_cast<std::size_t>(g)];
    gr.n = spec.grids[static_cast<std::size_t>(g)].size();
    double sum = 0.0;
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(spec.trials));
    for (int t = 0; t < spec.trials; ++t) {
      const TrialOutcome& o =
          outcomes[static_cast<std::size_t>(g * spec.trials + t)];
      if (!o.converged) {
        ++gr.trials_excluded;
        continue;
      }
      losses.push_back(o.loss);
      sum += o.loss;
    }
    gr.trials_included = static_cast<int>(losses.size());
    report.warnings += gr.trials_excluded;
    if (losses.empty()) {
      gr.risk = kNan;
      gr.std_error = kNan;
      continue;
    }
    gr.risk = sum / static_cast<double>(losses.size());
    if (losses.size() >= 2) {
      double ss = 0.0;
      for (double l : losses) ss += (l - gr.risk) * (l - gr.risk);
      const auto m = static_cast<double>(losses.size());
      gr.std_error = std::sqrt(ss / (m - 1.0) / m);
    }
  }
  report.slopes = compute_slopes(report.grids);
  return report;
}

// ---------------------------------------------------------------------------
// Bivariate current status study.
// ---------------------------------------------------------------------------

CurrentStatusResult run_current_status(int n, std::uint64_t seed, bool clamp,
                                       const SolverConfig& cfg) {
  if (n < 1)
    throw std::invalid_argument("run_current_status: n must be >= 1");
  const TestFunction f0 = TestFunction::current_status_cdf();
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<Point> xs(static_cast<std::size_t>(n));
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = uniform53(rng);
    const double x2 = uniform53(rng);
    const double u = uniform53(rng);
    xs[static_cast<std::size_t>(i)] = {x1, x2};
    y[i] = u < f0({x1, x2}) ? 1.0 : 0.0;
  }

  CurrentStatusResult result;
  result.model = fit_em(xs, y, cfg);
  result.n = n;
  result.clamped = clamp;

  auto mse_on = [&](int lo, int hi) {
    double ss = 0.0;
    int count = 0;
    for (int i = lo; i <= hi; ++i) {
      for (int j = lo; j <= hi; ++j) {
        const Point x{i / 20.0, j / 20.0};
        double pred = predict(result.model, x);
        if (clamp) pred = std::clamp(pred, 0.0, 1.0);
        const double err = pred - f0(x);
        ss += err * err;
        ++count;
      }
    }
    return ss / static_cast<double>(count);
  };
  result.mse_full = mse_on(0, 20);
  result.mse_interior = mse_on(4, 16);
  return result;
}

}  // namespace hkreg
