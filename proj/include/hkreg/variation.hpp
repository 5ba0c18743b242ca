#pragma once

#include <functional>

#include "hkreg/lattice.hpp"

namespace hkreg {

// Axis-aligned box [lo, hi], lo <= hi componentwise. Degenerate axes
// (lo[s] == hi[s]) are allowed; quasi-volumes skip them.
struct Rectangle {
  Point lo, hi;
  Rectangle(Point a, Point b);
};

// Finite sum of quadrant indicators f(x) = sum_j coeffs[j] 1{anchors[j] <= x}.
// anchors[0] is the origin, so coeffs[0] is the value at 0; anchors are
// distinct. Right pieces are closed: the jump at anchor z is attained at z.
struct RectPiecewiseFn {
  int d = 0;
  std::vector<Point> anchors;
  Eigen::VectorXd coeffs;

  RectPiecewiseFn() = default;
  RectPiecewiseFn(int dim, std::vector<Point> a, Eigen::VectorXd c);

  int size() const { return static_cast<int>(anchors.size()); }
  double operator()(const Point& x) const;
};

// Alternating corner sum over the box. Axes with lo[s] == hi[s] contribute a
// single corner value; with all axes degenerate this degenerates to f(lo).
double quasi_volume(const std::function<double(const Point&)>& f,
                    const Rectangle& box);

// All non-origin entries of the differenced tensor are >= -tol. The origin
// entry is the value at 0 and carries no constraint.
bool is_entirely_monotone(const Tensor& t, double tol = 1e-9);

// Variation read off the coefficients: sum_{j>=1} |coeffs[j]|.
double hk0_variation_coeffs(const RectPiecewiseFn& f);

// Vitali variation of f over the box, computed on the split generated by the
// anchor coordinates falling inside it. For functions of this class the
// generating split attains the supremum over all splits.
double vitali_rect(const RectPiecewiseFn& f, const Rectangle& box);

// Vitali variations summed over the faces {x : x_s = 0 for s outside S},
// S ranging over nonempty subsets of the axes.
double hk0_variation_full(const RectPiecewiseFn& f);

// Minimal entirely monotone pair with f - f(0) = plus - minus. Splits the
// coefficient tail by sign; variations add.
struct EmDecomposition {
  RectPiecewiseFn plus, minus;
};
EmDecomposition em_decompose(const RectPiecewiseFn& f);

}  // namespace hkreg
