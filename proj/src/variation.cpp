#include "hkreg/variation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace hkreg {

Rectangle::Rectangle(Point a, Point b) : lo(std::move(a)), hi(std::move(b)) {
  if (!leq(lo, hi)) {
    throw std::invalid_argument("Rectangle: lo must be <= hi componentwise");
  }
}

RectPiecewiseFn::RectPiecewiseFn(int dim, std::vector<Point> a,
                                 Eigen::VectorXd c)
    : d(dim), anchors(std::move(a)), coeffs(std::move(c)) {
  if (d < 1) throw std::invalid_argument("RectPiecewiseFn: d must be >= 1");
  if (anchors.empty() || static_cast<Eigen::Index>(anchors.size()) != coeffs.size()) {
    throw std::invalid_argument("RectPiecewiseFn: anchor/coefficient mismatch");
  }
  for (const Point& z : anchors) {
    if (static_cast<int>(z.size()) != d) {
      throw std::invalid_argument("RectPiecewiseFn: anchor dimension mismatch");
    }
    for (double v : z) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("RectPiecewiseFn: anchor outside [0,1]^d");
      }
    }
  }
  for (double v : anchors[0]) {
    if (v != 0.0) {
      throw std::invalid_argument("RectPiecewiseFn: first anchor must be 0");
    }
  }
  std::vector<Point> sorted = anchors;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("RectPiecewiseFn: anchors must be distinct");
  }
}

double RectPiecewiseFn::operator()(const Point& x) const {
  if (static_cast<int>(x.size()) != d) {
    throw std::invalid_argument("RectPiecewiseFn: point dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    const Point& z = anchors[j];
    bool dom = true;
    for (int s = 0; s < d; ++s) {
      if (z[s] > x[s]) {
        dom = false;
        break;
      }
    }
    if (dom) acc += coeffs[static_cast<Eigen::Index>(j)];
  }
  return acc;
}

double quasi_volume(const std::function<double(const Point&)>& f,
                    const Rectangle& box) {
  const int d = static_cast<int>(box.lo.size());
  int varying[32];
  int nv = 0;
  for (int s = 0; s < d; ++s) {
    if (box.lo[s] != box.hi[s]) varying[nv++] = s;
  }
  double acc = 0.0;
  Point corner = box.hi;
  for (unsigned mask = 0; mask < (1u << nv); ++mask) {
    for (int b = 0; b < nv; ++b) {
      corner[varying[b]] = (mask & (1u << b)) ? box.lo[varying[b]] : box.hi[varying[b]];
    }
    acc += (__builtin_popcount(mask) & 1) ? -f(corner) : f(corner);
  }
  return acc;
}

bool is_entirely_monotone(const Tensor& t, double tol) {
  const Tensor dt = difference(t);
  for (std::int64_t i = 1; i < dt.values.size(); ++i) {
    if (dt.values[i] < -tol) return false;
  }
  return true;
}

double hk0_variation_coeffs(const RectPiecewiseFn& f) {
  double acc = 0.0;
  for (Eigen::Index j = 1; j < f.coeffs.size(); ++j) acc += std::abs(f.coeffs[j]);
  return acc;
}

double vitali_rect(const RectPiecewiseFn& f, const Rectangle& box) {
  if (static_cast<int>(box.lo.size()) != f.d) {
    throw std::invalid_argument("vitali_rect: box dimension mismatch");
  }
  const int d = f.d;
  // Univariate partition per axis: box endpoints plus anchor coordinates
  // strictly inside. Degenerate axes keep a single point.
  std::vector<std::vector<double>> cuts(d);
  for (int s = 0; s < d; ++s) {
    cuts[s].push_back(box.lo[s]);
    if (box.hi[s] > box.lo[s]) {
      for (const Point& z : f.anchors) {
        if (z[s] > box.lo[s] && z[s] < box.hi[s]) cuts[s].push_back(z[s]);
      }
      cuts[s].push_back(box.hi[s]);
      std::sort(cuts[s].begin(), cuts[s].end());
      cuts[s].erase(std::unique(cuts[s].begin(), cuts[s].end()), cuts[s].end());
    }
  }

  const std::function<double(const Point&)> eval = [&f](const Point& x) {
    return f(x);
  };

  std::vector<int> cell(d, 0);
  double total = 0.0;
  while (true) {
    Point lo(d), hi(d);
    for (int s = 0; s < d; ++s) {
      const auto& c = cuts[s];
      if (c.size() == 1) {
        lo[s] = hi[s] = c[0];
      } else {
        lo[s] = c[cell[s]];
        hi[s] = c[cell[s] + 1];
      }
    }
    total += std::abs(quasi_volume(eval, Rectangle(lo, hi)));

    int s = d - 1;
    for (; s >= 0; --s) {
      const int ncells = std::max<int>(1, static_cast<int>(cuts[s].size()) - 1);
      if (++cell[s] < ncells) break;
      cell[s] = 0;
    }
    if (s < 0) break;
  }
  return total;
}

namespace {

// Restriction of f to the face {x_s = 0 for s outside S}, expressed in the
// coordinates of S. Anchors with a nonzero coordinate outside S vanish there;
// surviving anchors project, merging duplicates.
RectPiecewiseFn restrict_to_face(const RectPiecewiseFn& f,
                                 const std::vector<int>& axes) {
  const int k = static_cast<int>(axes.size());
  std::map<Point, double> merged;
  for (std::size_t j = 0; j < f.anchors.size(); ++j) {
    const Point& z = f.anchors[j];
    bool on_face = true;
    for (int s = 0; s < f.d && on_face; ++s) {
      if (std::find(axes.begin(), axes.end(), s) == axes.end() && z[s] != 0.0) {
        on_face = false;
      }
    }
    if (!on_face) continue;
    Point proj(k);
    for (int a = 0; a < k; ++a) proj[a] = z[axes[a]];
    merged[proj] += f.coeffs[static_cast<Eigen::Index>(j)];
  }
  std::vector<Point> anchors;
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(merged.size()));
  anchors.reserve(merged.size());
  Eigen::Index i = 0;
  for (const auto& [z, c] : merged) {
    anchors.push_back(z);
    coeffs[i++] = c;
  }
  // The origin projects from f's first anchor and sorts first.
  return RectPiecewiseFn(k, std::move(anchors), std::move(coeffs));
}

}  // namespace

double hk0_variation_full(const RectPiecewiseFn& f) {
  const int d = f.d;
  double total = 0.0;
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    std::vector<int> axes;
    for (int s = 0; s < d; ++s) {
      if (mask & (1u << s)) axes.push_back(s);
    }
    const RectPiecewiseFn g = restrict_to_face(f, axes);
    const int k = static_cast<int>(axes.size());
    total += vitali_rect(g, Rectangle(Point(k, 0.0), Point(k, 1.0)));
  }
  return total;
}

EmDecomposition em_decompose(const RectPiecewiseFn& f) {
  std::vector<Point> ap{Point(f.d, 0.0)}, am{Point(f.d, 0.0)};
  std::vector<double> cp{0.0}, cm{0.0};
  for (Eigen::Index j = 1; j < f.coeffs.size(); ++j) {
    const double c = f.coeffs[j];
    if (c > 0.0) {
      ap.push_back(f.anchors[static_cast<std::size_t>(j)]);
      cp.push_back(c);
    } else if (c < 0.0) {
      am.push_back(f.anchors[static_cast<std::size_t>(j)]);
      cm.push_back(-c);
    }
  }
  auto tovec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()))
        .eval();
  };
  return EmDecomposition{RectPiecewiseFn(f.d, std::move(ap), tovec(cp)),
                         RectPiecewiseFn(f.d, std::move(am), tovec(cm))};
}

}  // namespace hkreg
