// hkfit: command line surface for entirely monotone and Hardy-Krause
// variation constrained least squares. Subcommands fit models from CSV
// data, evaluate stored models, inspect designs, and run the seeded
// simulation studies.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hkreg/estimator.hpp"
#include "hkreg/io.hpp"
#include "hkreg/lattice.hpp"
#include "hkreg/sim.hpp"
#include "hkreg/variation.hpp"

namespace {

using hkreg::Point;

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitNotConverged = 3;

struct SolverFlags {
  std::optional<double> tol;
  std::optional<int> max_iter;

  hkreg::SolverConfig apply(hkreg::SolverConfig cfg) const {
    if (tol) cfg.kkt_tol = *tol;
    if (max_iter) cfg.max_iter = *max_iter;
    return cfg;
  }
};

// Run fn against stdout when path is "-", else against a fresh file.
template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  fn(out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<int> parse_dims(const std::string& text) {
  std::vector<int> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
      dims.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("--grid expects comma separated positive integers, got '" +
                                  text + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (dims.empty())
    throw std::invalid_argument("--grid expects at least one dimension");
  return dims;
}

hkreg::EstimatorKind parse_estimator(const std::string& name) {
  if (name == "em") return hkreg::EstimatorKind::kEm;
  if (name == "hk") return hkreg::EstimatorKind::kHk;
  if (name == "em-capped") return hkreg::EstimatorKind::kEmCapped;
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

hkreg::FittedModel fit_with(hkreg::EstimatorKind kind,
                            const std::vector<Point>& xs,
                            const Eigen::VectorXd& y,
                            std::optional<double> budget,
                            const hkreg::SolverConfig& cfg) {
  switch (kind) {
    case hkreg::EstimatorKind::kEm:
      if (budget)
        throw std::invalid_argument(
            "--V requires a budgeted estimator (hk or em-capped)");
      return hkreg::fit_em(xs, y, cfg);
    case hkreg::EstimatorKind::kHk:
      if (!budget)
        throw std::invalid_argument("--estimator hk requires --V");
      return hkreg::fit_hk(xs, y, *budget, cfg);
    case hkreg::EstimatorKind::kEmCapped:
      if (!budget)
        throw std::invalid_argument("--estimator em-capped requires --V");
      return hkreg::fit_em_capped(xs, y, *budget, cfg);
  }
  throw std::logic_error("unreachable estimator kind");
}

void print_fit_summary(const hkreg::FittedModel& model, std::size_t n) {
  std::cout << "n " << n << "\n";
  std::cout << "p " << model.params << "\n";
  std::cout << "objective " << hkreg::format_double(model.diagnostics.objective)
            << "\n";
  std::cout << "kkt_residual "
            << hkreg::format_double(model.diagnostics.kkt_residual) << "\n";
  std::cout << "V_HK0 " << hkreg::format_double(hkreg::hk0_variation_coeffs(model.fn))
            << "\n";
  std::cout << "converged " << (model.diagnostics.converged ? "true" : "false")
            << "\n";
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const std::string& input, const std::string& output,
            const std::string& estimator, std::optional<double> budget,
            const SolverFlags& solver, const std::string& predictions) {
  const hkreg::DataSet data = hkreg::read_csv_file(input);
  if (!data.has_response)
    throw std::runtime_error("fit: input CSV needs a y column");
  const hkreg::SolverConfig cfg = solver.apply(hkreg::SolverConfig{});
  const hkreg::FittedModel model =
      fit_with(parse_estimator(estimator), data.xs, data.y, budget, cfg);
  hkreg::write_model_json_file(output, model);
  if (!predictions.empty()) {
    with_output(predictions, [&](std::ostream& out) {
      hkreg::write_predictions_csv(out, data.xs, model.fitted);
    });
  }
  print_fit_summary(model, data.xs.size());
  if (!model.diagnostics.converged) {
    std::cerr << "warning: solver did not reach its certificate; the model "
                 "was written anyway\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const std::string& model_path, const std::string& points_path,
                const std::string& output) {
  const hkreg::FittedModel model = hkreg::read_model_json_file(model_path);
  const hkreg::DataSet data = hkreg::read_csv_file(points_path);
  if (!data.xs.empty() &&
      static_cast<int>(data.xs[0].size()) != model.fn.d) {
    throw std::runtime_error(
        "predict: point dimension does not match the model");
  }
  Eigen::VectorXd yhat(static_cast<Eigen::Index>(data.xs.size()));
  for (std::size_t i = 0; i < data.xs.size(); ++i)
    yhat[static_cast<Eigen::Index>(i)] = hkreg::predict(model, data.xs[i]);
  with_output(output, [&](std::ostream& out) {
    hkreg::write_predictions_csv(out, data.xs, yhat);
  });
  return kExitOk;
}

// ---------------------------------------------------------------------------
// variation
// ---------------------------------------------------------------------------

int cmd_variation(const std::string& model_path) {
  const hkreg::FittedModel model = hkreg::read_model_json_file(model_path);
  std::cout << hkreg::format_double(hkreg::hk0_variation_coeffs(model.fn))
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

// A design is a lattice when its distinct points are exactly the product of
// the per-axis coordinate levels.
bool is_lattice_design(const std::vector<Point>& xs) {
  const std::size_t d = xs[0].size();
  std::set<Point> distinct(xs.begin(), xs.end());
  std::vector<std::set<double>> levels(d);
  for (const Point& x : xs)
    for (std::size_t j = 0; j < d; ++j) levels[j].insert(x[j]);
  std::size_t cells = 1;
  for (const auto& lv : levels) {
    if (cells > distinct.size()) return false;  // also guards overflow
    cells *= lv.size();
  }
  return cells == distinct.size();
}

int cmd_design(const std::string& points_path) {
  const hkreg::DataSet data = hkreg::read_csv_file(points_path);
  const auto dm = hkreg::DesignMatrix::componentwise_min(data.xs);
  std::cout << "n " << data.xs.size() << "\n";
  std::cout << "d " << data.xs[0].size() << "\n";
  std::cout << "p " << dm.cols() << "\n";
  std::cout << "lattice " << (is_lattice_design(data.xs) ? "true" : "false")
            << "\n";
  try {
    std::cout << "vc_bound "
              << hkreg::vc_bound(static_cast<int>(data.xs.size()),
                                 static_cast<int>(data.xs[0].size()))
              << "\n";
  } catch (const std::overflow_error&) {
    std::cout << "vc_bound overflow\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void write_risk_csv(std::ostream& out, const hkreg::RiskReport& report) {
  out << "n,risk,stderr\n";
  for (const auto& g : report.grids) {
    out << g.n << ',' << hkreg::format_double(g.risk) << ','
        << hkreg::format_double(g.std_error) << "\n";
  }
}

std::string slopes_json(const hkreg::RiskReport& report) {
  nlohmann::json j;
  j["computable"] = report.slopes.computable;
  if (report.slopes.computable) {
    j["vs_log_n"] = report.slopes.vs_log_n;
    j["vs_log_n_over_logn"] = report.slopes.vs_log_n_over_logn;
    j["vs_log_n_over_logn2"] = report.slopes.vs_log_n_over_logn2;
  } else {
    j["reason"] = report.slopes.reason;
  }
  if (std::isfinite(report.budget)) j["budget"] = report.budget;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

int run_risk_cli(const hkreg::ExperimentSpec& spec,
                 const hkreg::SolverConfig& cfg, const std::string& out,
                 const std::string& slopes_out) {
  const hkreg::RiskReport report = hkreg::run_risk_experiment(spec, cfg);
  with_output(out, [&](std::ostream& os) { write_risk_csv(os, report); });
  with_output(slopes_out,
              [&](std::ostream& os) { os << slopes_json(report); });
  if (report.warnings > 0)
    std::cerr << "warning: " << report.warnings
              << " trial(s) did not converge and were excluded\n";
  return kExitOk;
}

// One seeded draw from a figure configuration plus one column per fitted
// surface, evaluated at the design points.
int write_figure_csv(
    const std::string& out, const std::vector<Point>& xs,
    const Eigen::VectorXd& y, const Eigen::VectorXd& truth,
    const std::vector<std::pair<std::string, hkreg::FittedModel>>& fits) {
  with_output(out, [&](std::ostream& os) {
    const std::size_t d = xs[0].size();
    for (std::size_t j = 1; j <= d; ++j) os << 'x' << j << ',';
    os << "y,truth";
    for (const auto& [name, model] : fits) os << ',' << name;
    os << "\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j)
        os << hkreg::format_double(xs[i][j]) << ',';
      const auto k = static_cast<Eigen::Index>(i);
      os << hkreg::format_double(y[k]) << ','
         << hkreg::format_double(truth[k]);
      for (const auto& [name, model] : fits)
        os << ',' << hkreg::format_double(model.fitted[k]);
      os << "\n";
    }
  });
  for (const auto& [name, model] : fits) {
    if (!model.diagnostics.converged) {
      std::cerr << "warning: fit '" << name
                << "' did not reach its certificate\n";
      return kExitNotConverged;
    }
  }
  return kExitOk;
}

Eigen::VectorXd truth_at(const hkreg::TestFunction& f,
                         const std::vector<Point>& xs) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i)
    t[static_cast<Eigen::Index>(i)] = f(xs[i]);
  return t;
}

// fig1/fig2/fig5: one entirely monotone fit. fig3/fig4: variation
// constrained fits at one, two, and three times the base budget.
int run_figure_preset(const std::string& preset, std::uint64_t seed,
                      std::optional<double> sigma_flag,
                      std::optional<double> v_flag, const SolverFlags& solver,
                      const std::string& out) {
  const double sigma = sigma_flag.value_or(1.0);
  const hkreg::SolverConfig cfg = solver.apply(hkreg::SolverConfig{});
  std::mt19937_64 rng(hkreg::splitmix64(seed));

  std::vector<Point> xs;
  hkreg::TestFunction f = hkreg::TestFunction::additive_linear();
  if (preset == "fig1") {
    f = hkreg::TestFunction::additive_linear();
  } else if (preset == "fig2" || preset == "fig5") {
    f = hkreg::TestFunction::two_step();
  } else if (preset == "fig3") {
    f = hkreg::TestFunction::neg_corner();
  } else if (preset == "fig4") {
    f = hkreg::TestFunction::additive_linear();
  }
  if (preset == "fig5") {
    xs.resize(100);
    for (auto& x : xs) x = {hkreg::uniform53(rng), hkreg::uniform53(rng)};
  } else {
    xs = hkreg::lattice_points(hkreg::LatticeGrid({10, 10}));
  }
  const Eigen::VectorXd truth = truth_at(f, xs);
  const Eigen::VectorXd y = hkreg::generate_observations(f, xs, sigma, rng);

  std::vector<std::pair<std::string, hkreg::FittedModel>> fits;
  if (preset == "fig3" || preset == "fig4") {
    const double base = v_flag.value_or(f.oracle_variation());
    fits.emplace_back("fitted_1v", hkreg::fit_hk(xs, y, base, cfg));
    fits.emplace_back("fitted_2v", hkreg::fit_hk(xs, y, 2.0 * base, cfg));
    fits.emplace_back("fitted_3v", hkreg::fit_hk(xs, y, 3.0 * base, cfg));
  } else {
    if (v_flag)
      throw std::invalid_argument("--V does not apply to preset '" + preset +
                                  "'");
    fits.emplace_back("fitted", hkreg::fit_em(xs, y, cfg));
  }
  return write_figure_csv(out, xs, y, truth, fits);
}

int run_current_status_cli(int n, std::uint64_t seed, bool clamp,
                           const SolverFlags& solver, const std::string& out) {
  const hkreg::SolverConfig cfg =
      solver.apply(hkreg::simulation_solver_defaults());
  const hkreg::CurrentStatusResult result =
      hkreg::run_current_status(n, seed, clamp, cfg);
  with_output(out, [&](std::ostream& os) {
    hkreg::write_model_json(os, result.model);
  });
  std::cout << "n " << result.n << "\n";
  std::cout << "converged "
            << (result.model.diagnostics.converged ? "true" : "false") << "\n";
  std::cout << "clamped " << (result.clamped ? "true" : "false") << "\n";
  std::cout << "mse_full " << hkreg::format_double(result.mse_full) << "\n";
  std::cout << "mse_interior " << hkreg::format_double(result.mse_interior)
            << "\n";
  return result.model.diagnostics.converged ? kExitOk : kExitNotConverged;
}

int cmd_simulate(const std::string& preset, const std::string& function,
                 const std::vector<std::string>& grid_flags,
                 std::optional<double> sigma_flag, std::optional<int> trials,
                 const std::string& estimator, std::optional<double> v_flag,
                 std::uint64_t seed, bool clamp, const SolverFlags& solver,
                 const std::string& out, const std::string& slopes_out) {
  if (!preset.empty()) {
    if (!function.empty() || !grid_flags.empty())
      throw std::invalid_argument(
          "--preset replaces --function/--grid; do not combine them");
    if (preset == "current-status")
      return run_current_status_cli(500, seed, clamp, solver, out);
    if (preset == "fig1" || preset == "fig2" || preset == "fig3" ||
        preset == "fig4" || preset == "fig5")
      return run_figure_preset(preset, seed, sigma_flag, v_flag, solver, out);
    if (preset == "checkered") {
      hkreg::ExperimentSpec spec;
      spec.function = hkreg::TestFunction::checkered();
      for (int s : {50, 60, 80, 95, 110})
        spec.grids.emplace_back(std::vector<int>{s, s});
      spec.sigma = sigma_flag.value_or(0.5);
      spec.trials = trials.value_or(20);
      spec.estimator = hkreg::EstimatorKind::kHk;
      spec.v_policy = v_flag ? hkreg::VPolicy::explicit_value(*v_flag)
                             : hkreg::VPolicy::oracle();
      spec.seed = seed;
      const hkreg::SolverConfig cfg =
          solver.apply(hkreg::simulation_solver_defaults());
      return run_risk_cli(spec, cfg, out, slopes_out);
    }
    throw std::invalid_argument("unknown preset '" + preset + "'");
  }

  if (function.empty())
    throw std::invalid_argument("simulate needs --preset or --function");
  if (grid_flags.empty())
    throw std::invalid_argument("simulate needs at least one --grid");
  hkreg::ExperimentSpec spec;
  spec.function = hkreg::TestFunction::parse(function);
  for (const std::string& g : grid_flags)
    spec.grids.emplace_back(parse_dims(g));
  spec.sigma = sigma_flag.value_or(1.0);
  spec.trials = trials.value_or(20);
  spec.estimator = parse_estimator(estimator);
  if (spec.estimator == hkreg::EstimatorKind::kEm && v_flag)
    throw std::invalid_argument(
        "--V requires a budgeted estimator (hk or em-capped)");
  spec.v_policy = v_flag ? hkreg::VPolicy::explicit_value(*v_flag)
                         : hkreg::VPolicy::oracle();
  spec.seed = seed;
  const hkreg::SolverConfig cfg =
      solver.apply(hkreg::simulation_solver_defaults());
  return run_risk_cli(spec, cfg, out, slopes_out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hkfit: least squares regression under entire monotonicity or a "
      "Hardy-Krause variation budget"};
  app.require_subcommand(1);

  // fit ----------------------------------------------------------------
  std::string fit_in, fit_out, fit_estimator = "em", fit_predictions;
  std::optional<double> fit_v;
  SolverFlags fit_solver;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit an estimator to a CSV data set and write the model JSON");
  fit->add_option("input", fit_in, "Input CSV with header x1,...,xd,y")
      ->required();
  fit->add_option("output", fit_out, "Path for the model JSON")->required();
  fit->add_option("--estimator", fit_estimator,
                  "Estimator: em (entirely monotone cone), hk (variation "
                  "budget), em-capped (monotone cone with a jump-mass cap)")
      ->check(CLI::IsMember({"em", "hk", "em-capped"}));
  fit->add_option("--V", fit_v,
                  "Variation budget; required for hk and em-capped");
  fit->add_option("--tol", fit_solver.tol,
                  "KKT tolerance for the optimality certificate");
  fit->add_option("--max-iter", fit_solver.max_iter,
                  "Maximum solver iterations");
  fit->add_option("--predictions", fit_predictions,
                  "Also write the fitted values at the design points to this "
                  "CSV ('-' for stdout)");

  // predict --------------------------------------------------------------
  std::string pr_model, pr_points, pr_out = "-";
  CLI::App* pred = app.add_subcommand(
      "predict", "Evaluate a stored model at the points of a CSV");
  pred->add_option("model", pr_model, "Model JSON produced by fit")
      ->required();
  pred->add_option("points", pr_points,
                   "CSV with header x1,...,xd (a y column is ignored)")
      ->required();
  pred->add_option("output", pr_out,
                   "Output CSV with header x1,...,xd,yhat ('-' for stdout)");

  // variation ------------------------------------------------------------
  std::string var_model;
  CLI::App* var = app.add_subcommand(
      "variation",
      "Print the anchored Hardy-Krause variation of a stored model");
  var->add_option("model", var_model, "Model JSON produced by fit")
      ->required();

  // design ---------------------------------------------------------------
  std::string design_points;
  CLI::App* design = app.add_subcommand(
      "design",
      "Report the design size, parameter count, and lattice structure of a "
      "point set");
  design
      ->add_option("points", design_points,
                   "CSV with header x1,...,xd (a y column is ignored)")
      ->required();

  // simulate ---------------------------------------------------------------
  std::string sim_preset, sim_function, sim_estimator = "em";
  std::vector<std::string> sim_grids;
  std::optional<double> sim_sigma, sim_v;
  std::optional<int> sim_trials;
  std::uint64_t sim_seed = 0;
  bool sim_clamp = false;
  SolverFlags sim_solver;
  std::string sim_out = "-", sim_slopes_out = "-";
  CLI::App* sim = app.add_subcommand(
      "simulate",
      "Run a seeded risk experiment (CSV of n,risk,stderr plus a JSON of "
      "log-risk slopes) or regenerate a preset study");
  sim->add_option(
      "--preset", sim_preset,
      "One of: checkered (variation-budget risk study over five lattice "
      "sizes), fig1 (monotone fit, additive truth, 10x10 lattice), fig2 "
      "(monotone fit, two-step truth), fig3 (budgeted fits at 1x/2x/3x the "
      "oracle budget, negative-corner truth), fig4 (same budgets, additive "
      "truth), fig5 (monotone fit on a random 100-point design, two-step "
      "truth), current-status (binary-response study, n=500)");
  sim->add_option("--function", sim_function,
                  "Truth for an explicit experiment: additive-linear, "
                  "two-step, neg-corner, checkered, or current-status-cdf");
  sim->add_option("--grid", sim_grids,
                  "Lattice dimensions n1,n2,... for one grid; repeat the "
                  "flag for several grid sizes");
  sim->add_option("--sigma", sim_sigma, "Noise standard deviation");
  sim->add_option("--trials", sim_trials, "Trials per grid");
  sim->add_option("--estimator", sim_estimator,
                  "Estimator for explicit experiments: em, hk, or em-capped")
      ->check(CLI::IsMember({"em", "hk", "em-capped"}));
  sim->add_option("--V", sim_v,
                  "Explicit variation budget; defaults to the truth's exact "
                  "variation for budgeted estimators");
  sim->add_option("--seed", sim_seed, "Experiment seed");
  sim->add_flag("--clamp", sim_clamp,
                "Clamp predictions to [0,1] (current-status preset only)");
  sim->add_option("--tol", sim_solver.tol,
                  "KKT tolerance for the optimality certificate");
  sim->add_option("--max-iter", sim_solver.max_iter,
                  "Maximum solver iterations");
  sim->add_option("--out", sim_out,
                  "Destination for the CSV output ('-' for stdout)");
  sim->add_option("--slopes", sim_slopes_out,
                  "Destination for the slopes JSON ('-' for stdout)");

  // current-status -----------------------------------------------------
  int cs_n = 500;
  std::uint64_t cs_seed = 0;
  bool cs_clamp = false;
  SolverFlags cs_solver;
  std::string cs_out = "-";
  CLI::App* cs = app.add_subcommand(
      "current-status",
      "Bivariate current status study: binary responses from a smooth CDF, "
      "one monotone fit, MSE against the truth");
  cs->add_option("--n", cs_n, "Number of observations");
  cs->add_option("--seed", cs_seed, "Study seed");
  cs->add_flag("--clamp", cs_clamp,
               "Clamp predictions to [0,1] before the errors are taken");
  cs->add_option("--tol", cs_solver.tol,
                 "KKT tolerance for the optimality certificate");
  cs->add_option("--max-iter", cs_solver.max_iter,
                 "Maximum solver iterations");
  cs->add_option("--out", cs_out,
                 "Destination for the model JSON ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (fit->parsed())
      return cmd_fit(fit_in, fit_out, fit_estimator, fit_v, fit_solver,
                     fit_predictions);
    if (pred->parsed()) return cmd_predict(pr_model, pr_points, pr_out);
    if (var->parsed()) return cmd_variation(var_model);
    if (design->parsed()) return cmd_design(design_points);
    if (sim->parsed())
      return cmd_simulate(sim_preset, sim_function, sim_grids, sim_sigma,
                          sim_trials, sim_estimator, sim_v, sim_seed,
                          sim_clamp, sim_solver, sim_out, sim_slopes_out);
    if (cs->parsed())
      return run_current_status_cli(cs_n, cs_seed, cs_clamp, cs_solver,
                                    cs_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  std::cerr << "error: no subcommand\n";
  return kExitBadInput;
}
