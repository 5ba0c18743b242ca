#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hkreg/design.hpp"
#include "oracles.hpp"

using hkreg::DesignMatrix;
using hkreg::LatticeGrid;
using hkreg::Point;

namespace {

std::set<std::vector<double>> column_set(const Eigen::MatrixXd& a) {
  std::set<std::vector<double>> cols;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    std::vector<double> c(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) c[i] = a(i, j);
    cols.insert(std::move(c));
  }
  return cols;
}

std::vector<Point> anti_diagonal(int n) {
  std::vector<Point> xs;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    xs.push_back({t, 1.0 - t});
  }
  return xs;
}

}  // namespace

TEST_CASE("lattice design on a 2x2 grid") {
  const DesignMatrix a = DesignMatrix::lattice(LatticeGrid({2, 2}));
  CHECK(a.rows() == 4);
  CHECK(a.cols() == 4);
  Eigen::MatrixXd want(4, 4);
  want << 1, 0, 0, 0,
          1, 1, 0, 0,
          1, 0, 1, 0,
          1, 1, 1, 1;
  CHECK(a.materialize() == want);
}

TEST_CASE("dense and implicit lattice backends agree") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    std::vector<int> dims(d);
    for (int j = 0; j < d; ++j) dims[j] = 2 + static_cast<int>(rng() % 4);
    LatticeGrid g(dims);
    const DesignMatrix impl = DesignMatrix::lattice(g);
    const DesignMatrix dense = DesignMatrix::naive_grid(hkreg::lattice_points(g));

    REQUIRE(impl.cols() == g.size());  // p = n on a full lattice
    REQUIRE(dense.cols() == g.size());
    CHECK(impl.anchors() == dense.anchors());
    CHECK(impl.materialize() == dense.materialize());

    const auto oi = impl.op();
    const auto od = dense.op();
    const Eigen::MatrixXd m = dense.materialize();
    const Eigen::VectorXd x = oracle::random_vector(rng, g.size());
    const Eigen::VectorXd r = oracle::random_vector(rng, g.size());
    Eigen::VectorXd ax_i, ax_d, atr_i, atr_d;
    oi.apply(x, ax_i);
    od.apply(x, ax_d);
    oi.transpose_apply(r, atr_i);
    od.transpose_apply(r, atr_d);
    CHECK((ax_i - m * x).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((ax_d - m * x).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((atr_i - m.transpose() * r).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((atr_d - m.transpose() * r).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("single point collapses to the intercept") {
  const DesignMatrix a = DesignMatrix::naive_grid({{0.3, 0.7}});
  CHECK(a.rows() == 1);
  CHECK(a.cols() == 1);
  CHECK(a.anchors()[0] == Point{0.0, 0.0});
  CHECK(a.materialize()(0, 0) == 1.0);
}

TEST_CASE("duplicate points stay as duplicate rows") {
  const DesignMatrix a = DesignMatrix::componentwise_min(
      {{0.3, 0.7}, {0.3, 0.7}, {0.6, 0.2}});
  CHECK(a.rows() == 3);
  const Eigen::MatrixXd m = a.materialize();
  CHECK(m.row(0) == m.row(1));
}

TEST_CASE("anti-diagonal designs hit the quadratic count") {
  for (int n : {2, 5, 6, 9}) {
    const auto xs = anti_diagonal(n);
    const DesignMatrix a = DesignMatrix::naive_grid(xs);
    const DesignMatrix b = DesignMatrix::componentwise_min(xs);
    CHECK(a.cols() == n * (n + 1) / 2);
    CHECK(b.cols() == n * (n + 1) / 2);
  }
}

TEST_CASE("strategies produce the same columns and anchors") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 60; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const int n = 1 + static_cast<int>(rng() % 12);
    const auto xs = oracle::random_design(rng, n, d);
    const DesignMatrix a = DesignMatrix::naive_grid(xs);
    const DesignMatrix b = DesignMatrix::componentwise_min(xs);
    CHECK(column_set(a.materialize()) == column_set(b.materialize()));
    CHECK(a.anchors() == b.anchors());
    CHECK(static_cast<unsigned long long>(a.cols()) <= hkreg::vc_bound(n, d));
  }
}

TEST_CASE("columns match their canonical anchors") {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const int n = 1 + static_cast<int>(rng() % 10);
    const auto xs = oracle::random_design(rng, n, d);
    const DesignMatrix a = DesignMatrix::naive_grid(xs);
    const Eigen::MatrixXd m = a.materialize();
    REQUIRE(a.anchors()[0] == Point(d, 0.0));
    CHECK(std::is_sorted(a.anchors().begin(), a.anchors().end()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      bool nonzero = false;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const bool dom = hkreg::leq(a.anchors()[j], xs[i]);
        CHECK(m(i, j) == (dom ? 1.0 : 0.0));
        nonzero = nonzero || dom;
      }
      CHECK(nonzero);  // zero columns are dropped
    }
  }
}

TEST_CASE("dense operator helper matches the matrix") {
  std::mt19937_64 rng(34);
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(7, 4);
  const auto op = hkreg::dense_operator(m);
  const Eigen::VectorXd x = oracle::random_vector(rng, 4);
  const Eigen::VectorXd r = oracle::random_vector(rng, 7);
  Eigen::VectorXd ax, atr;
  op.apply(x, ax);
  op.transpose_apply(r, atr);
  CHECK((ax - m * x).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((atr - m.transpose() * r).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("vc_bound") {
  CHECK(hkreg::vc_bound(4, 2) == 11ull);
  CHECK(hkreg::vc_bound(3, 5) == 8ull);  // capped at j = n, gives 2^n
  CHECK(hkreg::vc_bound(10000, 2) == 1ull + 10000ull + 49995000ull);
  CHECK(hkreg::vc_bound(0, 3) == 1ull);
  CHECK_THROWS_AS(hkreg::vc_bound(1000, 500), std::overflow_error);
  CHECK_THROWS_AS(hkreg::vc_bound(-1, 2), std::invalid_argument);
}

TEST_CASE("design validation") {
  CHECK_THROWS_AS(DesignMatrix::naive_grid({}), std::invalid_argument);
  CHECK_THROWS_AS(DesignMatrix::naive_grid({{0.2, 0.3}, {0.1}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DesignMatrix::naive_grid({{0.2, 1.3}}), std::invalid_argument);
  CHECK_THROWS_AS(DesignMatrix::componentwise_min({{-0.1}}),
                  std::invalid_argument);
}
