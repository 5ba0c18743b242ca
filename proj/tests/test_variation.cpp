#include <doctest.h>

#include <cmath>
#include <random>

#include "hkreg/variation.hpp"
#include "oracles.hpp"

using hkreg::LatticeGrid;
using hkreg::Point;
using hkreg::Rectangle;
using hkreg::RectPiecewiseFn;
using hkreg::Tensor;

namespace {

// Random anchored function with coordinates drawn from a small set so that
// anchors share breakpoints and sometimes touch the faces.
RectPiecewiseFn random_rpf(std::mt19937_64& rng, int d, int extra_anchors) {
  static const double kCoords[] = {0.0, 0.2, 0.4, 0.5, 0.75, 1.0};
  std::vector<Point> anchors{Point(d, 0.0)};
  for (int k = 0; k < extra_anchors; ++k) {
    Point z(d);
    for (int s = 0; s < d; ++s) z[s] = kCoords[rng() % 6];
    if (std::find(anchors.begin(), anchors.end(), z) == anchors.end()) {
      anchors.push_back(z);
    }
  }
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(anchors.size()));
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) coeffs[j] = u(rng);
  return RectPiecewiseFn(d, std::move(anchors), std::move(coeffs));
}

}  // namespace

TEST_CASE("quasi_volume corner sums") {
  SUBCASE("d=1 is the increment") {
    auto f = [](const Point& x) { return x[0] * x[0]; };
    CHECK(hkreg::quasi_volume(f, Rectangle({0.25}, {0.75})) ==
          doctest::Approx(0.5625 - 0.0625));
  }
  SUBCASE("d=2 four corners") {
    auto f = [](const Point& x) { return x[0] * x[1]; };
    // Product functions: quasi-volume factors into per-axis increments.
    CHECK(hkreg::quasi_volume(f, Rectangle({0.2, 0.3}, {0.7, 0.9})) ==
          doctest::Approx(0.5 * 0.6));
  }
  SUBCASE("degenerate axis reduces to a difference") {
    auto f = [](const Point& x) { return x[0] + 2.0 * x[1]; };
    CHECK(hkreg::quasi_volume(f, Rectangle({0.2, 0.5}, {0.6, 0.5})) ==
          doctest::Approx(0.4));
    CHECK(hkreg::quasi_volume(f, Rectangle({0.2, 0.5}, {0.2, 0.5})) ==
          doctest::Approx(f({0.2, 0.5})));
  }
  SUBCASE("additive under splitting a box") {
    std::mt19937_64 rng(21);
    auto f = [](const Point& x) {
      double acc = 1.0;
      for (double v : x) acc *= std::sin(3.0 * v) + 1.5;
      return acc;
    };
    for (int rep = 0; rep < 200; ++rep) {
      const int d = 1 + static_cast<int>(rng() % 3);
      Point lo(d), hi(d);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int s = 0; s < d; ++s) {
        double a = u(rng), b = u(rng);
        lo[s] = std::min(a, b);
        hi[s] = std::max(a, b) + 1e-3;
        hi[s] = std::min(hi[s], 1.0);
      }
      const int axis = static_cast<int>(rng() % d);
      const double mid = 0.5 * (lo[axis] + hi[axis]);
      Point hi_left = hi, lo_right = lo;
      hi_left[axis] = mid;
      lo_right[axis] = mid;
      const double whole = hkreg::quasi_volume(f, Rectangle(lo, hi));
      const double left = hkreg::quasi_volume(f, Rectangle(lo, hi_left));
      const double right = hkreg::quasi_volume(f, Rectangle(lo_right, hi));
      CHECK(whole == doctest::Approx(left + right).epsilon(1e-10));
    }
  }
}

TEST_CASE("is_entirely_monotone") {
  SUBCASE("increasing values can still fail") {
    Eigen::VectorXd v(4);
    v << 0, 2, 2, 3;
    CHECK_FALSE(hkreg::is_entirely_monotone(Tensor(LatticeGrid({2, 2}), v)));
  }
  SUBCASE("running sums of nonnegative tails always pass") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 100; ++rep) {
      const int d = 1 + static_cast<int>(rng() % 3);
      std::vector<int> dims(d);
      for (int j = 0; j < d; ++j) dims[j] = 1 + static_cast<int>(rng() % 5);
      LatticeGrid g(dims);
      Eigen::VectorXd b = oracle::random_vector(rng, g.size(), 0.0, 1.0);
      b[0] = -3.0;  // the origin value is unconstrained
      CHECK(hkreg::is_entirely_monotone(hkreg::cumsum(Tensor(g, b))));
    }
  }
  SUBCASE("tolerance") {
    Eigen::VectorXd v(2);
    v << 0.0, -5e-10;
    CHECK(hkreg::is_entirely_monotone(Tensor(LatticeGrid({2}), v), 1e-9));
    CHECK_FALSE(hkreg::is_entirely_monotone(Tensor(LatticeGrid({2}), v), 1e-10));
  }
}

TEST_CASE("anchored function evaluation is right closed") {
  Eigen::VectorXd c(2);
  c << 0.25, 1.0;
  RectPiecewiseFn f(2, {{0.0, 0.0}, {0.5, 0.5}}, c);
  CHECK(f({0.5, 0.5}) == doctest::Approx(1.25));
  CHECK(f({0.49, 0.5}) == doctest::Approx(0.25));
  CHECK(f({1.0, 1.0}) == doctest::Approx(1.25));
}

TEST_CASE("RectPiecewiseFn validation") {
  Eigen::VectorXd c(1);
  c << 1.0;
  CHECK_THROWS_AS(RectPiecewiseFn(2, {{0.1, 0.0}}, c), std::invalid_argument);
  Eigen::VectorXd c2(2);
  c2 << 1.0, 2.0;
  CHECK_THROWS_AS(RectPiecewiseFn(2, {{0.0, 0.0}, {0.0, 0.0}}, c2),
                  std::invalid_argument);
  CHECK_THROWS_AS(RectPiecewiseFn(2, {{0.0, 0.0}, {0.3, 1.2}}, c2),
                  std::invalid_argument);
}

TEST_CASE("vitali_rect on simple functions") {
  SUBCASE("interior quadrant indicator has unit variation") {
    Eigen::VectorXd c(2);
    c << 0.0, 1.0;
    RectPiecewiseFn f(2, {{0.0, 0.0}, {0.5, 0.5}}, c);
    CHECK(hkreg::vitali_rect(f, Rectangle({0.0, 0.0}, {1.0, 1.0})) ==
          doctest::Approx(1.0));
  }
  SUBCASE("half plane jump is flat in the other axis") {
    Eigen::VectorXd c(2);
    c << 0.0, 1.0;
    RectPiecewiseFn f(2, {{0.0, 0.0}, {0.5, 0.0}}, c);
    CHECK(hkreg::vitali_rect(f, Rectangle({0.0, 0.0}, {1.0, 1.0})) ==
          doctest::Approx(0.0));
  }
  SUBCASE("d=1 equals total variation inside the box") {
    Eigen::VectorXd c(3);
    c << 1.0, 2.0, -1.0;
    RectPiecewiseFn f(1, {{0.0}, {0.2}, {0.7}}, c);
    CHECK(hkreg::vitali_rect(f, Rectangle({0.0}, {1.0})) == doctest::Approx(3.0));
    CHECK(hkreg::vitali_rect(f, Rectangle({0.5}, {1.0})) == doctest::Approx(1.0));
    CHECK(hkreg::vitali_rect(f, Rectangle({0.25}, {0.6})) == doctest::Approx(0.0));
  }
}

TEST_CASE("face sum variation equals the coefficient tail") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 80; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const RectPiecewiseFn f = random_rpf(rng, d, 2 + static_cast<int>(rng() % 9));
    CHECK(hkreg::hk0_variation_full(f) ==
          doctest::Approx(hkreg::hk0_variation_coeffs(f)).epsilon(1e-10));
  }
}

TEST_CASE("entirely monotone functions: variation is the range") {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 40; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    RectPiecewiseFn f = random_rpf(rng, d, 2 + static_cast<int>(rng() % 7));
    for (Eigen::Index j = 1; j < f.coeffs.size(); ++j) {
      f.coeffs[j] = std::abs(f.coeffs[j]);
    }
    const double v = hkreg::hk0_variation_full(f);
    CHECK(v == doctest::Approx(f(Point(d, 1.0)) - f(Point(d, 0.0))).epsilon(1e-10));
  }
}

TEST_CASE("em_decompose splits by sign") {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + static_cast<int>(rng() % 3);
    const RectPiecewiseFn f = random_rpf(rng, d, 2 + static_cast<int>(rng() % 8));
    const auto dec = hkreg::em_decompose(f);
    for (Eigen::Index j = 1; j < dec.plus.coeffs.size(); ++j) {
      CHECK(dec.plus.coeffs[j] > 0.0);
    }
    for (Eigen::Index j = 1; j < dec.minus.coeffs.size(); ++j) {
      CHECK(dec.minus.coeffs[j] > 0.0);
    }
    CHECK(hkreg::hk0_variation_coeffs(dec.plus) +
              hkreg::hk0_variation_coeffs(dec.minus) ==
          doctest::Approx(hkreg::hk0_variation_coeffs(f)).epsilon(1e-12));
    const double f0 = f(Point(d, 0.0));
    for (int k = 0; k < 20; ++k) {
      const Point x = oracle::random_point(rng, d);
      CHECK(f(x) - f0 ==
            doctest::Approx(dec.plus(x) - dec.minus(x)).epsilon(1e-12));
    }
  }
}
