#include "hkreg/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_map>

namespace hkreg {

namespace {

void validate_design(const std::vector<Point>& xs) {
  if (xs.empty()) throw std::invalid_argument("design: no points");
  const std::size_t d = xs[0].size();
  if (d == 0) throw std::invalid_argument("design: zero dimensional point");
  for (const Point& x : xs) {
    if (x.size() != d) {
      throw std::invalid_argument("design: inconsistent dimensions");
    }
    for (double v : x) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("design: coordinate outside [0,1]");
      }
    }
  }
}

struct WordsHash {
  const std::vector<std::uint64_t>* pool;
  std::size_t wpc;
  std::size_t operator()(std::size_t col) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t w = 0; w < wpc; ++w) {
      h ^= (*pool)[col * wpc + w];
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

struct WordsEq {
  const std::vector<std::uint64_t>* pool;
  std::size_t wpc;
  bool operator()(std::size_t a, std::size_t b) const {
    return std::equal(pool->begin() + a * wpc, pool->begin() + (a + 1) * wpc,
                      pool->begin() + b * wpc);
  }
};

struct PointHash {
  std::size_t operator()(const Point& p) const {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : p) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h ^= bits;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

constexpr std::size_t kMaxCandidates = 50'000'000;

}  // namespace

DesignMatrix DesignMatrix::from_candidates(const std::vector<Point>& xs,
                                           const std::vector<Point>& candidates) {
  const std::size_t n = xs.size();
  const int d = static_cast<int>(xs[0].size());
  const std::size_t wpc = (n + 63) / 64;

  // Per-axis sorted unique coordinates and cumulative rank masks:
  // mask_axis[s][a] has bit i set when x_i's coordinate s is at least the
  // a-th unique value. A candidate's column is the AND across axes.
  std::vector<std::vector<double>> uniq(d);
  for (int s = 0; s < d; ++s) {
    uniq[s].reserve(n);
    for (const Point& x : xs) uniq[s].push_back(x[s]);
    std::sort(uniq[s].begin(), uniq[s].end());
    uniq[s].erase(std::unique(uniq[s].begin(), uniq[s].end()), uniq[s].end());
  }
  std::vector<std::vector<std::uint64_t>> rank_mask(d);
  for (int s = 0; s < d; ++s) {
    rank_mask[s].assign((uniq[s].size() + 1) * wpc, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = static_cast<std::size_t>(
          std::lower_bound(uniq[s].begin(), uniq[s].end(), xs[i][s]) -
          uniq[s].begin());
      // x_i contributes to every threshold a <= r.
      for (std::size_t a = 0; a <= r; ++a) {
        rank_mask[s][a * wpc + i / 64] |= (1ull << (i % 64));
      }
    }
  }

  std::vector<std::uint64_t> pool;
  pool.reserve(1024 * wpc);
  std::unordered_map<std::size_t, std::size_t, WordsHash, WordsEq> seen(
      64, WordsHash{&pool, wpc}, WordsEq{&pool, wpc});

  std::vector<std::uint64_t> col(wpc);
  std::size_t distinct = 0;
  for (const Point& z : candidates) {
    // Candidate coordinates are design coordinates by construction; the rank
    // is the exact position among the unique values.
    for (int s = 0; s < d; ++s) {
      const std::size_t a = static_cast<std::size_t>(
          std::lower_bound(uniq[s].begin(), uniq[s].end(), z[s]) -
          uniq[s].begin());
      const std::uint64_t* m = rank_mask[s].data() + a * wpc;
      if (s == 0) {
        std::copy_n(m, wpc, col.begin());
      } else {
        for (std::size_t w = 0; w < wpc; ++w) col[w] &= m[w];
      }
    }
    const std::size_t probe = pool.size() / wpc;
    pool.insert(pool.end(), col.begin(), col.end());
    auto [it, inserted] = seen.emplace(probe, distinct);
    if (inserted) {
      ++distinct;
    } else {
      pool.resize(pool.size() - wpc);
    }
  }

  // Canonical anchors: componentwise minimum of the support. Zero columns
  // drop; the all-ones column is anchored at the origin and ordered first.
  struct Pending {
    Point anchor;
    std::size_t col;
  };
  std::vector<Pending> cols;
  cols.reserve(distinct);
  bool have_ones = false;
  std::size_t ones_col = 0;
  for (std::size_t c = 0; c < distinct; ++c) {
    const std::uint64_t* w = pool.data() + c * wpc;
    std::size_t pop = 0;
    for (std::size_t k = 0; k < wpc; ++k) pop += __builtin_popcountll(w[k]);
    if (pop == 0) continue;
    if (pop == n) {
      have_ones = true;
      ones_col = c;
      continue;
    }
    Point anchor(d, 2.0);
    for (std::size_t k = 0; k < wpc; ++k) {
      std::uint64_t word = w[k];
      while (word) {
        const std::size_t i = k * 64 + static_cast<std::size_t>(__builtin_ctzll(word));
        word &= word - 1;
        for (int s = 0; s < d; ++s) anchor[s] = std::min(anchor[s], xs[i][s]);
      }
    }
    cols.push_back({std::move(anchor), c});
  }
  std::sort(cols.begin(), cols.end(),
            [](const Pending& a, const Pending& b) { return a.anchor < b.anchor; });

  DesignMatrix m;
  m.n_ = static_cast<Eigen::Index>(n);
  m.wpc_ = static_cast<Eigen::Index>(wpc);
  m.anchors_.reserve(cols.size() + 1);
  m.bits_.reserve((cols.size() + 1) * wpc);
  m.anchors_.push_back(Point(d, 0.0));
  if (have_ones) {
    m.bits_.insert(m.bits_.end(), pool.begin() + ones_col * wpc,
                   pool.begin() + (ones_col + 1) * wpc);
  } else {
    // v(0) is all ones regardless of the candidate set.
    std::vector<std::uint64_t> ones(wpc, ~0ull);
    if (n % 64) ones[wpc - 1] = (1ull << (n % 64)) - 1;
    m.bits_.insert(m.bits_.end(), ones.begin(), ones.end());
  }
  for (const Pending& p : cols) {
    m.anchors_.push_back(p.anchor);
    m.bits_.insert(m.bits_.end(), pool.begin() + p.col * wpc,
                   pool.begin() + (p.col + 1) * wpc);
  }
  return m;
}

DesignMatrix DesignMatrix::naive_grid(const std::vector<Point>& xs) {
  validate_design(xs);
  const int d = static_cast<int>(xs[0].size());
  std::vector<std::vector<double>> uniq(d);
  for (int s = 0; s < d; ++s) {
    for (const Point& x : xs) uniq[s].push_back(x[s]);
    std::sort(uniq[s].begin(), uniq[s].end());
    uniq[s].erase(std::unique(uniq[s].begin(), uniq[s].end()), uniq[s].end());
  }
  std::size_t total = 1;
  for (int s = 0; s < d; ++s) {
    if (total > kMaxCandidates / uniq[s].size()) {
      throw std::length_error("naive_grid: candidate grid too large");
    }
    total *= uniq[s].size();
  }
  std::vector<Point> candidates;
  candidates.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    Point z(d);
    for (int s = 0; s < d; ++s) z[s] = uniq[s][idx[s]];
    candidates.push_back(std::move(z));
    int s = d - 1;
    for (; s >= 0; --s) {
      if (++idx[s] < uniq[s].size()) break;
      idx[s] = 0;
    }
    if (s < 0) break;
  }
  return from_candidates(xs, candidates);
}

DesignMatrix DesignMatrix::componentwise_min(const std::vector<Point>& xs) {
  validate_design(xs);
  const int n = static_cast<int>(xs.size());
  const int d = static_cast<int>(xs[0].size());

  std::unordered_map<Point, char, PointHash> cset;
  std::vector<Point> candidates;
  auto push = [&](const Point& z) {
    if (cset.emplace(z, 0).second) candidates.push_back(z);
  };

  // Minima over subsets of size 1..d via a bounded-depth combination walk.
  std::vector<int> pick;
  std::size_t visited = 0;
  std::function<void(int, const Point&)> rec = [&](int start, const Point& acc) {
    if (!pick.empty()) push(acc);
    if (static_cast<int>(pick.size()) == d) return;
    for (int i = start; i < n; ++i) {
      if (++visited > kMaxCandidates) {
        throw std::length_error("componentwise_min: too many candidate subsets");
      }
      Point next = acc;
      if (pick.empty()) {
        next = xs[i];
      } else {
        for (int s = 0; s < d; ++s) next[s] = std::min(next[s], xs[i][s]);
      }
      pick.push_back(i);
      rec(i + 1, next);
      pick.pop_back();
    }
  };
  rec(0, Point(d, 0.0));
  return from_candidates(xs, candidates);
}

DesignMatrix DesignMatrix::lattice(const LatticeGrid& grid) {
  DesignMatrix m;
  m.n_ = grid.size();
  m.grid_ = grid;
  m.anchors_ = lattice_points(grid);
  return m;
}

LinearOperator DesignMatrix::op() const {
  LinearOperator h;
  h.rows = rows();
  h.cols = cols();
  if (grid_) {
    const LatticeGrid g = *grid_;
    h.apply = [g](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      cumsum_copy(g, x, out);
    };
    h.transpose_apply = [g](const Eigen::VectorXd& r, Eigen::VectorXd& out) {
      out = r;
      cumsum_transpose_in_place(g, out);
    };
    return h;
  }
  const Eigen::Index n = n_;
  const Eigen::Index p = cols();
  const Eigen::Index wpc = wpc_;
  const std::vector<std::uint64_t>* bits = &bits_;
  h.apply = [n, p, wpc, bits](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out.setZero(n);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double b = x[j];
      if (b == 0.0) continue;
      const std::uint64_t* w = bits->data() + j * wpc;
      for (Eigen::Index k = 0; k < wpc; ++k) {
        std::uint64_t word = w[k];
        while (word) {
          out[k * 64 + __builtin_ctzll(word)] += b;
          word &= word - 1;
        }
      }
    }
  };
  h.transpose_apply = [p, wpc, bits](const Eigen::VectorXd& r,
                                     Eigen::VectorXd& out) {
    out.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::uint64_t* w = bits->data() + j * wpc;
      double acc = 0.0;
      for (Eigen::Index k = 0; k < wpc; ++k) {
        std::uint64_t word = w[k];
        while (word) {
          acc += r[k * 64 + __builtin_ctzll(word)];
          word &= word - 1;
        }
      }
      out[j] = acc;
    }
  };
  return h;
}

Eigen::MatrixXd DesignMatrix::materialize() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows(), cols());
  if (grid_) {
    const auto pts = lattice_points(*grid_);
    for (Eigen::Index i = 0; i < rows(); ++i) {
      for (Eigen::Index j = 0; j < cols(); ++j) {
        a(i, j) = leq(anchors_[j], pts[i]) ? 1.0 : 0.0;
      }
    }
    return a;
  }
  for (Eigen::Index j = 0; j < cols(); ++j) {
    const std::uint64_t* w = bits_.data() + j * wpc_;
    for (Eigen::Index k = 0; k < wpc_; ++k) {
      std::uint64_t word = w[k];
      while (word) {
        a(k * 64 + __builtin_ctzll(word), j) = 1.0;
        word &= word - 1;
      }
    }
  }
  return a;
}

LinearOperator dense_operator(Eigen::MatrixXd a) {
  auto m = std::make_shared<Eigen::MatrixXd>(std::move(a));
  LinearOperator h;
  h.rows = m->rows();
  h.cols = m->cols();
  h.apply = [m](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out.noalias() = (*m) * x;
  };
  h.transpose_apply = [m](const Eigen::VectorXd& r, Eigen::VectorXd& out) {
    out.noalias() = m->transpose() * r;
  };
  return h;
}

unsigned long long vc_bound(int n, int d) {
  if (n < 0 || d < 0) throw std::invalid_argument("vc_bound: negative input");
  unsigned long long total = 0;
  for (int j = 0; j <= std::min(n, d); ++j) {
    // C(n, j) by the multiplicative rule; each partial product is integral.
    unsigned long long c = 1;
    for (int k = 1; k <= j; ++k) {
      const unsigned __int128 wide =
          static_cast<unsigned __int128>(c) * static_cast<unsigned long long>(n - k + 1);
      const unsigned __int128 q = wide / static_cast<unsigned long long>(k);
      if (q > std::numeric_limits<unsigned long long>::max()) {
        throw std::overflow_error("vc_bound: binomial overflows 64 bits");
      }
      c = static_cast<unsigned long long>(q);
    }
    if (total > std::numeric_limits<unsigned long long>::max() - c) {
      throw std::overflow_error("vc_bound: sum overflows 64 bits");
    }
    total += c;
  }
  return total;
}

}  // namespace hkreg
