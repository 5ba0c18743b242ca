#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "hkreg/estimator.hpp"
#include "hkreg/lattice.hpp"
#include "hkreg/variation.hpp"
#include "oracles.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

hkreg::SolverConfig tight_config() {
  hkreg::SolverConfig cfg;
  cfg.max_iter = 200000;
  cfg.kkt_tol = 1e-9;
  return cfg;
}

double tail_abs_sum(const hkreg::RectPiecewiseFn& fn) {
  double s = 0.0;
  for (Eigen::Index j = 1; j < fn.coeffs.size(); ++j) s += std::abs(fn.coeffs[j]);
  return s;
}

}  // namespace

TEST_CASE("noiseless entirely monotone data is interpolated") {
  hkreg::LatticeGrid grid{{10, 10}};
  const auto xs = hkreg::lattice_points(grid);
  Eigen::VectorXd y(grid.size());
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    y[i] = p[0] + p[1];
  }
  const auto model = hkreg::fit_em(xs, y, tight_config());
  CHECK(model.diagnostics.converged);
  CHECK((model.fitted - y).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(model.diagnostics.objective < 1e-14);
  CHECK(model.lattice_design);
  CHECK(model.kind == hkreg::EstimatorKind::kEm);
}

TEST_CASE("one dimensional em fit equals isotonic regression") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 5 + static_cast<int>(rng() % 60);
    std::vector<hkreg::Point> xs;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      xs.push_back({static_cast<double>(i) / n});
      y[i] = 0.05 * i + gauss(rng);
    }
    const Eigen::VectorXd iso = oracle::pava(y);
    const auto model = hkreg::fit_em(xs, y, tight_config());
    CHECK(model.diagnostics.converged);
    CHECK((model.fitted - iso).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("zero budget fits are the constant mean, capped or not") {
  std::mt19937_64 rng(32);
  const auto xs = oracle::random_design(rng, 25, 2);
  const Eigen::VectorXd y = oracle::random_vector(rng, 25, 2.0);
  for (auto* fitter : {&hkreg::fit_hk, &hkreg::fit_em_capped}) {
    const auto model = (*fitter)(xs, y, 0.0, tight_config(), hkreg::FitBackend::kAuto);
    CHECK(model.diagnostics.converged);
    CHECK(model.fn.coeffs.size() == 1);
    CHECK(model.fn.coeffs[0] == doctest::Approx(y.mean()).epsilon(1e-10));
    CHECK((model.fitted.array() - y.mean()).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("budget at the interpolant variation returns the data") {
  std::mt19937_64 rng(33);
  hkreg::LatticeGrid grid{{5, 4}};
  const auto xs = hkreg::lattice_points(grid);
  const Eigen::VectorXd y = oracle::random_vector(rng, grid.size(), 1.0);
  hkreg::Tensor t(grid, y);
  const hkreg::Tensor coef = hkreg::difference(t);
  double v = 0.0;
  for (std::int64_t i = 1; i < grid.size(); ++i) v += std::abs(coef.values[i]);
  const auto model = hkreg::fit_hk(xs, y, v, tight_config());
  CHECK(model.diagnostics.converged);
  CHECK((model.fitted - y).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("capped fit with infinite budget matches the plain em fit") {
  std::mt19937_64 rng(34);
  hkreg::LatticeGrid grid{{6, 6}};
  const auto xs = hkreg::lattice_points(grid);
  Eigen::VectorXd y(grid.size());
  std::normal_distribution<double> gauss(0.0, 0.7);
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    y[i] = p[0] * p[1] + gauss(rng);
  }
  const auto em = hkreg::fit_em(xs, y, tight_config());
  const auto capped = hkreg::fit_em_capped(xs, y, kInf, tight_config());
  CHECK(em.diagnostics.converged);
  CHECK(capped.diagnostics.converged);
  CHECK((em.fitted - capped.fitted).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("capped fit honors the jump mass budget") {
  hkreg::LatticeGrid grid{{8, 8}};
  const auto xs = hkreg::lattice_points(grid);
  Eigen::VectorXd y(grid.size());
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    y[i] = p[0] + p[1];  // range spans 2 across the grid
  }
  const auto model = hkreg::fit_em_capped(xs, y, 1.0, tight_config());
  CHECK(model.diagnostics.converged);
  CHECK(tail_abs_sum(model.fn) <= 1.0 + 1e-12);
  for (Eigen::Index j = 1; j < model.fn.coeffs.size(); ++j) {
    CHECK(model.fn.coeffs[j] >= 0.0);
  }
}

TEST_CASE("em fits are entirely monotone on the working grid") {
  std::mt19937_64 rng(35);
  hkreg::LatticeGrid grid{{7, 5}};
  const auto xs = hkreg::lattice_points(grid);
  const Eigen::VectorXd y = oracle::random_vector(rng, grid.size(), 1.0);
  const auto model = hkreg::fit_em(xs, y, tight_config());
  hkreg::Tensor fitted(grid, model.fitted);
  CHECK(hkreg::is_entirely_monotone(fitted, 1e-9));
  // Anti-monotone data still yields a feasible fit.
  Eigen::VectorXd anti(grid.size());
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    anti[i] = -(p[0] + p[1]);
  }
  const auto flat = hkreg::fit_em(xs, anti, tight_config());
  hkreg::Tensor flat_t(grid, flat.fitted);
  CHECK(hkreg::is_entirely_monotone(flat_t, 1e-9));
}

TEST_CASE("hk budget binds and the model variation matches its coefficients") {
  std::mt19937_64 rng(36);
  hkreg::LatticeGrid grid{{6, 5}};
  const auto xs = hkreg::lattice_points(grid);
  const Eigen::VectorXd y = oracle::random_vector(rng, grid.size(), 1.5);
  const double v = 0.8;
  const auto model = hkreg::fit_hk(xs, y, v, tight_config());
  CHECK(model.diagnostics.converged);
  const double tail = tail_abs_sum(model.fn);
  CHECK(tail <= v + 1e-12);
  CHECK(hkreg::hk0_variation_coeffs(model.fn) == doctest::Approx(tail).epsilon(1e-12));
  CHECK(hkreg::hk0_variation_full(model.fn) == doctest::Approx(tail).epsilon(1e-9));
}

TEST_CASE("objective is monotone in the budget") {
  std::mt19937_64 rng(37);
  hkreg::LatticeGrid grid{{5, 5}};
  const auto xs = hkreg::lattice_points(grid);
  const Eigen::VectorXd y = oracle::random_vector(rng, grid.size(), 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double v : {0.0, 0.3, 0.8, 1.5, 3.0}) {
    const auto model = hkreg::fit_hk(xs, y, v, tight_config());
    CHECK(model.diagnostics.converged);
    CHECK(model.diagnostics.objective <= prev + 1e-9);
    prev = model.diagnostics.objective;
  }
}

TEST_CASE("fitted values are a contraction toward feasible truth") {
  std::mt19937_64 rng(38);
  hkreg::LatticeGrid grid{{6, 6}};
  const auto xs = hkreg::lattice_points(grid);
  Eigen::VectorXd truth(grid.size());
  for (std::int64_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    truth[i] = p[0] + p[1];  // in the cone, tail mass 2
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd y(grid.size());
  for (std::int64_t i = 0; i < grid.size(); ++i) y[i] = truth[i] + gauss(rng);
  const auto em = hkreg::fit_em(xs, y, tight_config());
  CHECK((em.fitted - truth).norm() <= (y - truth).norm() + 1e-9);
  const auto hk = hkreg::fit_hk(xs, y, 2.0, tight_config());
  CHECK((hk.fitted - truth).norm() <= (y - truth).norm() + 1e-9);
}

TEST_CASE("grid and dense backends agree off lattice") {
  std::mt19937_64 rng(39);
  for (int rep = 0; rep < 6; ++rep) {
    const int n = 20 + static_cast<int>(rng() % 15);
    const auto xs = oracle::random_design(rng, n, 2);
    const Eigen::VectorXd y = oracle::random_vector(rng, n, 1.0);
    const auto cfg = tight_config();
    const auto em_g = hkreg::fit_em(xs, y, cfg, hkreg::FitBackend::kGrid);
    const auto em_d = hkreg::fit_em(xs, y, cfg, hkreg::FitBackend::kDense);
    CHECK((em_g.fitted - em_d.fitted).lpNorm<Eigen::Infinity>() < 1e-6);
    const auto hk_g = hkreg::fit_hk(xs, y, 1.2, cfg, hkreg::FitBackend::kGrid);
    const auto hk_d = hkreg::fit_hk(xs, y, 1.2, cfg, hkreg::FitBackend::kDense);
    CHECK((hk_g.fitted - hk_d.fitted).lpNorm<Eigen::Infinity>() < 1e-6);
    const auto cp_g = hkreg::fit_em_capped(xs, y, 0.9, cfg, hkreg::FitBackend::kGrid);
    const auto cp_d = hkreg::fit_em_capped(xs, y, 0.9, cfg, hkreg::FitBackend::kDense);
    CHECK((cp_g.fitted - cp_d.fitted).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK_FALSE(em_g.lattice_design);
  }
}

TEST_CASE("grid backend anchors are canonical design anchors") {
  std::mt19937_64 rng(40);
  for (int rep = 0; rep < 6; ++rep) {
    const int n = 12 + static_cast<int>(rng() % 10);
    const auto xs = oracle::random_design(rng, n, 2);
    const Eigen::VectorXd y = oracle::random_vector(rng, n, 1.0);
    const auto model =
        hkreg::fit_em(xs, y, tight_config(), hkreg::FitBackend::kGrid);
    const auto dm = hkreg::DesignMatrix::componentwise_min(xs);
    const auto& canonical = dm.anchors();
    for (const auto& z : model.fn.anchors) {
      CHECK(std::find(canonical.begin(), canonical.end(), z) != canonical.end());
    }
  }
}

TEST_CASE("prediction is consistent with fitted values and anchor algebra") {
  std::mt19937_64 rng(41);
  const auto xs = oracle::random_design(rng, 30, 2);
  const Eigen::VectorXd y = oracle::random_vector(rng, 30, 1.0);
  const auto model = hkreg::fit_hk(xs, y, 1.0, tight_config());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(hkreg::predict(model, xs[i]) ==
          doctest::Approx(model.fitted[static_cast<Eigen::Index>(i)]).epsilon(1e-10));
  }
  CHECK(hkreg::predict(model, {0.0, 0.0}) == doctest::Approx(model.fn.coeffs[0]));
  CHECK(hkreg::predict(model, {1.0, 1.0}) ==
        doctest::Approx(model.fn.coeffs.sum()).epsilon(1e-12));
  CHECK_THROWS_AS(hkreg::predict(model, {0.5}), std::invalid_argument);
}

TEST_CASE("empirical loss definition") {
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 1.0;
  CHECK(hkreg::empirical_loss(a, a) == 0.0);
  CHECK(hkreg::empirical_loss(a, b) == 1.0);
  std::mt19937_64 rng(42);
  const Eigen::VectorXd u = oracle::random_vector(rng, 17, 1.0);
  const Eigen::VectorXd v = oracle::random_vector(rng, 17, 1.0);
  double acc = 0.0;
  for (int i = 0; i < 17; ++i) acc += (u[i] - v[i]) * (u[i] - v[i]);
  CHECK(hkreg::empirical_loss(u, v) == doctest::Approx(acc / 17.0).epsilon(1e-15));
  Eigen::VectorXd w(3);
  CHECK_THROWS_AS(hkreg::empirical_loss(a, w), std::invalid_argument);
}

TEST_CASE("malformed fits are rejected") {
  std::mt19937_64 rng(43);
  const auto xs = oracle::random_design(rng, 10, 2);
  const Eigen::VectorXd y = oracle::random_vector(rng, 10, 1.0);
  CHECK_THROWS_AS(hkreg::fit_em({}, Eigen::VectorXd()), std::invalid_argument);
  CHECK_THROWS_AS(hkreg::fit_em(xs, Eigen::VectorXd::Zero(9)), std::invalid_argument);
  CHECK_THROWS_AS(hkreg::fit_hk(xs, y, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(hkreg::fit_em_capped(xs, y, std::nan("")), std::invalid_argument);
  auto ragged = xs;
  ragged[3] = {0.5};
  CHECK_THROWS_AS(hkreg::fit_em(ragged, y), std::invalid_argument);
  auto outside = xs;
  outside[2] = {0.5, 1.5};
  CHECK_THROWS_AS(hkreg::fit_em(outside, y), std::invalid_argument);
}
