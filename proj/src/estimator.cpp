#include "hkreg/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>

namespace hkreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest covering grid the implicit backend accepts before kAuto falls back
// to materialized columns. Five working vectors of this size stay well under
// a gigabyte.
constexpr std::int64_t kMaxGridCells = 20'000'000;

void validate_design(const std::vector<Point>& xs, const Eigen::VectorXd& y) {
  if (xs.empty()) throw std::invalid_argument("fit: empty design");
  if (static_cast<Eigen::Index>(xs.size()) != y.size()) {
    throw std::invalid_argument("fit: design/response length mismatch");
  }
  const std::size_t d = xs[0].size();
  if (d == 0) throw std::invalid_argument("fit: zero-dimensional design");
  for (const Point& x : xs) {
    if (x.size() != d) throw std::invalid_argument("fit: ragged design");
    for (double c : x) {
      if (!(c >= 0.0 && c <= 1.0)) {
        throw std::invalid_argument("fit: coordinates must lie in [0,1]");
      }
    }
  }
}

// Smallest product grid containing the design points, with 0 adjoined to
// every axis so the origin cell carries the intercept.
struct CoverGrid {
  LatticeGrid grid;
  std::vector<std::vector<double>> levels;
  std::vector<std::int64_t> row_cell;
  bool bijective = false;  // rows and cells in one-to-one correspondence
};

std::shared_ptr<CoverGrid> build_cover_grid(const std::vector<Point>& xs) {
  auto cover = std::make_shared<CoverGrid>();
  const int d = static_cast<int>(xs[0].size());
  cover->levels.resize(d);
  std::vector<int> dims(d);
  std::int64_t cells = 1;
  for (int j = 0; j < d; ++j) {
    auto& lv = cover->levels[j];
    lv.reserve(xs.size() + 1);
    lv.push_back(0.0);
    for (const Point& x : xs) lv.push_back(x[j]);
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    dims[j] = static_cast<int>(lv.size());
    if (cells > kMaxGridCells / dims[j]) return nullptr;
    cells *= dims[j];
  }
  cover->grid = LatticeGrid(dims);

  const auto strides = cover->grid.strides();
  cover->row_cell.resize(xs.size());
  std::vector<int> hits(static_cast<std::size_t>(cells), 0);
  bool bijective = cells == static_cast<std::int64_t>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::int64_t flat = 0;
    for (int j = 0; j < d; ++j) {
      const auto& lv = cover->levels[j];
      const auto it = std::lower_bound(lv.begin(), lv.end(), xs[i][j]);
      flat += static_cast<std::int64_t>(it - lv.begin()) * strides[j];
    }
    cover->row_cell[i] = flat;
    if (++hits[static_cast<std::size_t>(flat)] > 1) bijective = false;
  }
  cover->bijective = bijective;
  return cover;
}

// A restricted to the design rows: coefficients live on the covering grid,
// fitted values are running sums gathered at the rows' cells.
LinearOperator cover_operator(std::shared_ptr<CoverGrid> cover) {
  LinearOperator op;
  op.rows = static_cast<Eigen::Index>(cover->row_cell.size());
  op.cols = cover->grid.size();
  auto scratch = std::make_shared<Eigen::VectorXd>(op.cols);
  op.apply = [cover, scratch](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    cumsum_copy(cover->grid, v, *scratch);
    for (std::size_t i = 0; i < cover->row_cell.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = (*scratch)[cover->row_cell[i]];
    }
  };
  op.transpose_apply = [cover](const Eigen::VectorXd& r,
                               Eigen::VectorXd& out) {
    out.setZero();
    for (std::size_t i = 0; i < cover->row_cell.size(); ++i) {
      out[cover->row_cell[i]] += r[static_cast<Eigen::Index>(i)];
    }
    cumsum_transpose_in_place(cover->grid, out);
  };
  return op;
}

ConstraintKind constraint_for(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kEm:
      return ConstraintKind::kNonnegTail;
    case EstimatorKind::kHk:
      return ConstraintKind::kL1BallTail;
    case EstimatorKind::kEmCapped:
      return ConstraintKind::kCappedSimplexTail;
  }
  throw std::logic_error("unreachable");
}

// Collapse grid coefficients onto canonical anchors: every anchor becomes the
// componentwise minimum of the design points its indicator covers, and the
// all-ones indicator is anchored at the origin. Cells covering no design
// point carry zero weight by construction and are dropped. Fitted values are
// unchanged because merged anchors have identical indicator columns.
RectPiecewiseFn canonical_fn(const CoverGrid& cover,
                             const std::vector<Point>& xs,
                             const Eigen::VectorXd& beta) {
  const int d = cover.grid.dim();
  const Point origin(d, 0.0);
  std::map<Point, double> acc;
  double intercept = beta[0];

  const std::int64_t m = cover.grid.size();
  for (std::int64_t c = 1; c < m; ++c) {
    const double w = beta[c];
    if (w == 0.0) continue;
    const MultiIndex idx = cover.grid.unflat(c);
    Point z(d);
    for (int j = 0; j < d; ++j) z[j] = cover.levels[j][idx[j]];
    if (cover.bijective) {
      // Full grid: each cell is a design point and is its own canonical
      // anchor.
      acc[z] += w;
      continue;
    }
    Point lo(d, 2.0);
    std::size_t covered = 0;
    for (const Point& x : xs) {
      bool dom = true;
      for (int j = 0; j < d; ++j) {
        if (z[j] > x[j]) {
          dom = false;
          break;
        }
      }
      if (!dom) continue;
      ++covered;
      for (int j = 0; j < d; ++j) lo[j] = std::min(lo[j], x[j]);
    }
    if (covered == 0) continue;
    if (covered == xs.size()) {
      intercept += w;
    } else {
      acc[lo] += w;
    }
  }

  std::vector<Point> anchors;
  anchors.reserve(acc.size() + 1);
  anchors.push_back(origin);
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(acc.size()) + 1);
  coeffs[0] = intercept;
  Eigen::Index k = 1;
  for (auto& [z, w] : acc) {
    if (w == 0.0) continue;
    anchors.push_back(z);
    coeffs[k++] = w;
  }
  coeffs.conservativeResize(k);
  return RectPiecewiseFn(d, std::move(anchors), std::move(coeffs));
}

RectPiecewiseFn dense_fn(const DesignMatrix& dm, const Eigen::VectorXd& beta) {
  const auto& all = dm.anchors();
  std::vector<Point> anchors;
  anchors.reserve(all.size());
  anchors.push_back(all[0]);
  Eigen::VectorXd coeffs(beta.size());
  coeffs[0] = beta[0];
  Eigen::Index k = 1;
  for (Eigen::Index j = 1; j < beta.size(); ++j) {
    if (beta[j] == 0.0) continue;
    anchors.push_back(all[static_cast<std::size_t>(j)]);
    coeffs[k++] = beta[j];
  }
  coeffs.conservativeResize(k);
  return RectPiecewiseFn(static_cast<int>(all[0].size()), std::move(anchors),
                         std::move(coeffs));
}

FittedModel fit_impl(const std::vector<Point>& xs, const Eigen::VectorXd& y,
                     EstimatorKind kind, double budget,
                     const SolverConfig& cfg, FitBackend backend) {
  validate_design(xs, y);
  if (kind != EstimatorKind::kEm && !(budget >= 0.0)) {
    throw std::invalid_argument("fit: variation budget must be >= 0");
  }

  FittedModel model;
  model.kind = kind;
  model.budget = budget;
  const ConstraintKind constraint = constraint_for(kind);

  std::shared_ptr<CoverGrid> cover;
  if (backend != FitBackend::kDense) cover = build_cover_grid(xs);
  if (backend == FitBackend::kGrid && !cover) {
    throw std::invalid_argument("fit: covering grid too large");
  }

  if (cover && cover->bijective) {
    // On a bijective covering grid the interpolating coefficient vector is
    // unique: the difference transform of the responses in grid order. When
    // it already satisfies the constraints, the least squares projection of
    // y onto the constraint set is y itself, so the exact solution is known
    // without iterating.
    Eigen::VectorXd t(cover->grid.size());
    for (std::size_t i = 0; i < cover->row_cell.size(); ++i)
      t[cover->row_cell[i]] = y[static_cast<Eigen::Index>(i)];
    Tensor interp = difference(Tensor(cover->grid, std::move(t)));
    const bool need_nonneg = constraint != ConstraintKind::kL1BallTail;
    bool feasible = true;
    double tail_l1 = 0.0;
    for (std::int64_t c = 1; c < cover->grid.size() && feasible; ++c) {
      const double b = interp.values[c];
      if (need_nonneg && b < 0.0) feasible = false;
      tail_l1 += std::abs(b);
    }
    if (feasible && tail_l1 <= budget) {
      SolveResult sr;
      sr.converged = true;
      model.fitted = y;
      model.fn = canonical_fn(*cover, xs, interp.values);
      model.lattice_design = true;
      model.work_grid = cover->grid;
      model.params = cover->grid.size();
      model.diagnostics = std::move(sr);
      return model;
    }
  }

  if (cover) {
    const LinearOperator op = cover_operator(cover);
    SolveResult sr = solve_constrained_ls(op, y, constraint, budget, cfg);
    model.fitted.resize(op.rows);
    op.apply(sr.beta, model.fitted);
    model.fn = canonical_fn(*cover, xs, sr.beta);
    model.lattice_design = cover->bijective;
    model.work_grid = cover->grid;
    model.params = op.cols;
    sr.beta.resize(0);
    model.diagnostics = std::move(sr);
  } else {
    const DesignMatrix dm = DesignMatrix::componentwise_min(xs);
    const LinearOperator op = dm.op();
    SolveResult sr = solve_constrained_ls(op, y, constraint, budget, cfg);
    model.fitted.resize(op.rows);
    op.apply(sr.beta, model.fitted);
    model.fn = dense_fn(dm, sr.beta);
    model.lattice_design = dm.implicit_lattice();
    model.params = op.cols;
    sr.beta.resize(0);
    model.diagnostics = std::move(sr);
  }
  return model;
}

}  // namespace

FittedModel fit_em(const std::vector<Point>& xs, const Eigen::VectorXd& y,
                   const SolverConfig& cfg, FitBackend backend) {
  return fit_impl(xs, y, EstimatorKind::kEm, kInf, cfg, backend);
}

FittedModel fit_hk(const std::vector<Point>& xs, const Eigen::VectorXd& y,
                   double v, const SolverConfig& cfg, FitBackend backend) {
  return fit_impl(xs, y, EstimatorKind::kHk, v, cfg, backend);
}

FittedModel fit_em_capped(const std::vector<Point>& xs,
                          const Eigen::VectorXd& y, double v,
                          const SolverConfig& cfg, FitBackend backend) {
  return fit_impl(xs, y, EstimatorKind::kEmCapped, v, cfg, backend);
}

double predict(const FittedModel& model, const Point& x) {
  return model.fn(x);
}

double empirical_loss(const Eigen::VectorXd& fitted,
                      const Eigen::VectorXd& truth) {
  if (fitted.size() != truth.size()) {
    throw std::invalid_argument("empirical_loss: length mismatch");
  }
  if (fitted.size() == 0) {
    throw std::invalid_argument("empirical_loss: empty input");
  }
  return (fitted - truth).squaredNorm() / static_cast<double>(fitted.size());
}

}  // namespace hkreg
