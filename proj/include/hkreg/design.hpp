#pragma once

#include <functional>
#include <optional>

#include "hkreg/lattice.hpp"

namespace hkreg {

// Matrix-free view of an n-by-p design. apply writes A*x into a vector of
// length rows; transpose_apply writes A^T*r into a vector of length cols.
// Handles borrow the backing storage; keep the owner alive while in use.
struct LinearOperator {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> apply;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> transpose_apply;
};

LinearOperator dense_operator(Eigen::MatrixXd a);

// Design matrix whose columns are the distinct indicator vectors
// v(z)_i = 1{z <= x_i} over candidate anchors z, with the all-ones column
// anchored at the origin and kept first. Zero columns are dropped. Remaining
// anchors are canonical (componentwise minimum of the design points in the
// column's support) and sorted lexicographically.
//
// Two backends: packed column bits for general designs, and an implicit
// backend for full anchor lattices where apply is a running sum and
// transpose_apply a suffix sum.
class DesignMatrix {
 public:
  // Candidate anchors form the product of the per-axis unique coordinate
  // sets.
  static DesignMatrix naive_grid(const std::vector<Point>& xs);

  // Candidate anchors are componentwise minima of up to d design points.
  // Produces the same column set as naive_grid.
  static DesignMatrix componentwise_min(const std::vector<Point>& xs);

  static DesignMatrix lattice(const LatticeGrid& grid);

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(anchors_.size()); }
  const std::vector<Point>& anchors() const { return anchors_; }

  bool implicit_lattice() const { return grid_.has_value(); }
  const LatticeGrid* grid() const { return grid_ ? &*grid_ : nullptr; }

  LinearOperator op() const;
  Eigen::MatrixXd materialize() const;

 private:
  DesignMatrix() = default;
  static DesignMatrix from_candidates(const std::vector<Point>& xs,
                                      const std::vector<Point>& candidates);

  Eigen::Index n_ = 0;
  std::vector<Point> anchors_;
  std::optional<LatticeGrid> grid_;
  // Dense backend: wpc_ words per column, column j at bits_[j * wpc_].
  Eigen::Index wpc_ = 0;
  std::vector<std::uint64_t> bits_;
};

// sum_{j=0}^{d} C(n, j); an upper bound for the number of design columns.
// Throws std::overflow_error when the value exceeds unsigned long long.
unsigned long long vc_bound(int n, int d);

}  // namespace hkreg
