#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hkreg {

// Point in [0,1]^d. Dimension is the vector length, d >= 1.
using Point = std::vector<double>;

// Nonnegative integer coordinates of a lattice cell.
using MultiIndex = std::vector<int>;

// Componentwise partial order: a <= b in every coordinate.
// Throws std::invalid_argument on dimension mismatch.
bool leq(const Point& a, const Point& b);

// Regular anchor lattice {(i_1/n_1, ..., i_d/n_d) : 0 <= i_j <= n_j - 1}.
// Flat storage is row major: the last axis varies fastest.
struct LatticeGrid {
  std::vector<int> dims;

  LatticeGrid() = default;
  explicit LatticeGrid(std::vector<int> d);

  int dim() const { return static_cast<int>(dims.size()); }
  std::int64_t size() const;

  std::int64_t flat(const MultiIndex& idx) const;
  MultiIndex unflat(std::int64_t flat) const;
  Point point(std::int64_t flat) const;

  // stride[j] = product of dims after axis j.
  std::vector<std::int64_t> strides() const;

  bool operator==(const LatticeGrid& o) const { return dims == o.dims; }
};

// Values attached to every cell of a grid, in flat row-major order.
struct Tensor {
  LatticeGrid grid;
  Eigen::VectorXd values;

  Tensor() = default;
  Tensor(LatticeGrid g, Eigen::VectorXd v);
};

// All lattice points in flat order.
std::vector<Point> lattice_points(const LatticeGrid& grid);

// Forward differencing: (Dt)_i = sum over corners z in {0,1}^d with i-z >= 0
// of (-1)^{|z|} t_{i-z}. Inverse of cumsum. O(n 2^d).
Tensor difference(const Tensor& t);

// Running sums: (Ct)_i = sum_{i' <= i} t_{i'}, one prefix sweep per axis.
// Inverse of difference. O(n d).
Tensor cumsum(const Tensor& t);

// Adjoint of cumsum: (C^T t)_i = sum_{i' >= i} t_{i'}, suffix sweeps.
Tensor cumsum_transpose(const Tensor& t);

// In-place variants used on hot paths; v must have grid.size() entries.
void cumsum_in_place(const LatticeGrid& grid, Eigen::VectorXd& v);
void cumsum_transpose_in_place(const LatticeGrid& grid, Eigen::VectorXd& v);

// dst = running sums of src, with the copy folded into the first sweep so
// large grids take one fewer pass over memory. dst is resized; src is
// untouched (and must not alias dst).
void cumsum_copy(const LatticeGrid& grid, const Eigen::VectorXd& src,
                 Eigen::VectorXd& dst);

}  // namespace hkreg
