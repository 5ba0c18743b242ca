#include "hkreg/lattice.hpp"

#include <stdexcept>

namespace hkreg {

bool leq(const Point& a, const Point& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("leq: dimension mismatch");
  }
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > b[j]) return false;
  }
  return true;
}

LatticeGrid::LatticeGrid(std::vector<int> d) : dims(std::move(d)) {
  if (dims.empty()) {
    throw std::invalid_argument("LatticeGrid: empty dims");
  }
  for (int n : dims) {
    if (n < 1) throw std::invalid_argument("LatticeGrid: dims must be >= 1");
  }
}

std::int64_t LatticeGrid::size() const {
  std::int64_t s = 1;
  for (int n : dims) s *= n;
  return s;
}

std::vector<std::int64_t> LatticeGrid::strides() const {
  std::vector<std::int64_t> s(dims.size());
  std::int64_t acc = 1;
  for (int j = dim() - 1; j >= 0; --j) {
    s[j] = acc;
    acc *= dims[j];
  }
  return s;
}

std::int64_t LatticeGrid::flat(const MultiIndex& idx) const {
  if (static_cast<int>(idx.size()) != dim()) {
    throw std::invalid_argument("flat: index dimension mismatch");
  }
  std::int64_t f = 0;
  for (int j = 0; j < dim(); ++j) {
    if (idx[j] < 0 || idx[j] >= dims[j]) {
      throw std::out_of_range("flat: index outside grid");
    }
    f = f * dims[j] + idx[j];
  }
  return f;
}

MultiIndex LatticeGrid::unflat(std::int64_t flat) const {
  if (flat < 0 || flat >= size()) {
    throw std::out_of_range("unflat: flat index outside grid");
  }
  MultiIndex idx(dims.size());
  for (int j = dim() - 1; j >= 0; --j) {
    idx[j] = static_cast<int>(flat % dims[j]);
    flat /= dims[j];
  }
  return idx;
}

Point LatticeGrid::point(std::int64_t flat) const {
  MultiIndex idx = unflat(flat);
  Point x(dims.size());
  for (int j = 0; j < dim(); ++j) {
    x[j] = static_cast<double>(idx[j]) / static_cast<double>(dims[j]);
  }
  return x;
}

Tensor::Tensor(LatticeGrid g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size()) {
    throw std::invalid_argument("Tensor: value count does not match grid size");
  }
}

std::vector<Point> lattice_points(const LatticeGrid& grid) {
  std::vector<Point> pts;
  const std::int64_t n = grid.size();
  pts.reserve(static_cast<std::size_t>(n));
  for (std::int64_t f = 0; f < n; ++f) pts.push_back(grid.point(f));
  return pts;
}

Tensor difference(const Tensor& t) {
  const LatticeGrid& g = t.grid;
  const int d = g.dim();
  const std::int64_t n = g.size();
  const auto stride = g.strides();
  Eigen::VectorXd out(n);

  MultiIndex idx(d, 0);
  for (std::int64_t f = 0; f < n; ++f) {
    // Axes with idx[j] >= 1 admit a backward step; corners range over their
    // subsets. Sign alternates with subset parity.
    int active[32];
    int na = 0;
    for (int j = 0; j < d; ++j) {
      if (idx[j] >= 1) active[na++] = j;
    }
    double acc = 0.0;
    for (unsigned mask = 0; mask < (1u << na); ++mask) {
      std::int64_t src = f;
      for (int b = 0; b < na; ++b) {
        if (mask & (1u << b)) src -= stride[active[b]];
      }
      acc += (__builtin_popcount(mask) & 1) ? -t.values[src] : t.values[src];
    }
    out[f] = acc;

    for (int j = d - 1; j >= 0; --j) {
      if (++idx[j] < g.dims[j]) break;
      idx[j] = 0;
    }
  }
  return Tensor(g, std::move(out));
}

namespace {

// Sweep one axis: array decomposes into outer blocks of n_j lines with
// contiguous inner span equal to the axis stride.
template <bool kForward>
void axis_sweep(Eigen::VectorXd& v, std::int64_t n, int n_axis,
                std::int64_t inner) {
  double* p = v.data();
  if (inner == 1) {
    // Last axis: each line is an independent serial chain of dependent
    // additions. Run four lines abreast so the adds pipeline; per line the
    // operations and their order are unchanged.
    const std::int64_t lines = n / n_axis;
    std::int64_t line = 0;
    for (; line + 4 <= lines; line += 4) {
      double* r0 = p + (line + 0) * n_axis;
      double* r1 = p + (line + 1) * n_axis;
      double* r2 = p + (line + 2) * n_axis;
      double* r3 = p + (line + 3) * n_axis;
      if constexpr (kForward) {
        double a0 = r0[0], a1 = r1[0], a2 = r2[0], a3 = r3[0];
        for (int k = 1; k < n_axis; ++k) {
          a0 += r0[k]; r0[k] = a0;
          a1 += r1[k]; r1[k] = a1;
          a2 += r2[k]; r2[k] = a2;
          a3 += r3[k]; r3[k] = a3;
        }
      } else {
        double a0 = r0[n_axis - 1], a1 = r1[n_axis - 1];
        double a2 = r2[n_axis - 1], a3 = r3[n_axis - 1];
        for (int k = n_axis - 2; k >= 0; --k) {
          a0 += r0[k]; r0[k] = a0;
          a1 += r1[k]; r1[k] = a1;
          a2 += r2[k]; r2[k] = a2;
          a3 += r3[k]; r3[k] = a3;
        }
      }
    }
    for (; line < lines; ++line) {
      double* r = p + line * n_axis;
      if constexpr (kForward) {
        for (int k = 1; k < n_axis; ++k) r[k] += r[k - 1];
      } else {
        for (int k = n_axis - 2; k >= 0; --k) r[k] += r[k + 1];
      }
    }
    return;
  }
  const std::int64_t block = n_axis * inner;
  for (std::int64_t base = 0; base < n; base += block) {
    if constexpr (kForward) {
      for (int k = 1; k < n_axis; ++k) {
        double* dst = p + base + k * inner;
        const double* src = dst - inner;
        for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    } else {
      for (int k = n_axis - 2; k >= 0; --k) {
        double* dst = p + base + k * inner;
        const double* src = dst + inner;
        for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  }
}

}  // namespace

void cumsum_in_place(const LatticeGrid& grid, Eigen::VectorXd& v) {
  if (v.size() != grid.size()) {
    throw std::invalid_argument("cumsum_in_place: size mismatch");
  }
  const auto stride = grid.strides();
  for (int j = 0; j < grid.dim(); ++j) {
    axis_sweep<true>(v, grid.size(), grid.dims[j], stride[j]);
  }
}

void cumsum_transpose_in_place(const LatticeGrid& grid, Eigen::VectorXd& v) {
  if (v.size() != grid.size()) {
    throw std::invalid_argument("cumsum_transpose_in_place: size mismatch");
  }
  const auto stride = grid.strides();
  for (int j = 0; j < grid.dim(); ++j) {
    axis_sweep<false>(v, grid.size(), grid.dims[j], stride[j]);
  }
}

void cumsum_copy(const LatticeGrid& grid, const Eigen::VectorXd& src,
                 Eigen::VectorXd& dst) {
  const std::int64_t n = grid.size();
  if (src.size() != n) {
    throw std::invalid_argument("cumsum_copy: size mismatch");
  }
  dst.resize(n);
  // Fold the copy into the leading-axis sweep. Operations and their order
  // match the copy-then-sweep path exactly, so results are bit-identical.
  const auto stride = grid.strides();
  const std::int64_t inner = stride[0];
  const double* s = src.data();
  double* o = dst.data();
  for (std::int64_t i = 0; i < inner; ++i) o[i] = s[i];
  for (std::int64_t base = inner; base < n; base += inner) {
    const double* prev = o + base - inner;
    for (std::int64_t i = 0; i < inner; ++i) o[base + i] = prev[i] + s[base + i];
  }
  for (int j = 1; j < grid.dim(); ++j) {
    axis_sweep<true>(dst, n, grid.dims[j], stride[j]);
  }
}

Tensor cumsum(const Tensor& t) {
  Tensor out = t;
  cumsum_in_place(out.grid, out.values);
  return out;
}

Tensor cumsum_transpose(const Tensor& t) {
  Tensor out = t;
  cumsum_transpose_in_place(out.grid, out.values);
  return out;
}

}  // namespace hkreg
