#include "hkreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hkreg {

namespace {

// Threshold tau > 0 with sum_i max(m_i - tau, 0) = budget, for magnitudes m
// with sum(m) > budget. Sorting pivot; large inputs select a growing top
// block first so only the active head is ever sorted. Exact in either path.
double pivot_threshold(std::vector<double>& m, double budget) {
  const std::size_t n = m.size();
  std::size_t k = n;
  if (n > 4096) k = 1024;
  while (true) {
    if (k >= n) {
      std::sort(m.begin(), m.end(), std::greater<>());
      k = n;
    } else {
      std::nth_element(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k) - 1,
                       m.end(), std::greater<>());
      std::sort(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k),
                std::greater<>());
    }
    // The feasibility condition m_j > (S_j - budget)/j holds on a prefix;
    // the threshold comes from the last index where it holds. Scanning stops
    // at the first rank whose successor falls at or below the running pivot.
    double csum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      csum += m[j];
      const double tau = (csum - budget) / static_cast<double>(j + 1);
      const bool have_next = j + 1 < k;
      if (have_next || k == n) {
        // Sentinel below any attainable pivot: sum(m) > budget makes the
        // full-support pivot positive.
        const double next = have_next ? m[j + 1] : -1.0;
        if (next <= tau) return tau;
      }
    }
    if (k == n) return (csum - budget) / static_cast<double>(n);
    k = std::min(n, k * 8);
  }
}

void check_budget(double budget) {
  if (std::isnan(budget) || budget < 0.0) {
    throw std::invalid_argument("projection: budget must be nonnegative");
  }
}

// Fixed-point refinement of the threshold from a previous solve of a nearby
// problem. Each pass recomputes the active sum over {m > tau}; tau is exact
// once a pass reproduces it, since sum over {m_i > tau} of (m_i - tau) =
// budget then holds identically. Returns a negative value when the hint does
// not settle, in which case the caller falls back to the sorting pivot.
template <typename Magnitude>
double warm_threshold(const Eigen::VectorXd& v, double budget, double tau,
                      Magnitude mag) {
  const Eigen::Index p = v.size();
  for (int pass = 0; pass < 30; ++pass) {
    double s = 0.0;
    std::int64_t k = 0;
    for (Eigen::Index j = 1; j < p; ++j) {
      const double m = mag(v[j]);
      if (m > tau) {
        s += m;
        ++k;
      }
    }
    if (k == 0) return -1.0;
    const double next = (s - budget) / static_cast<double>(k);
    if (next == tau) return tau;
    tau = next;
  }
  return -1.0;
}

// Tail projections with an optional threshold hint carried across solver
// iterations. A null or stale hint degrades to the exact cold-start pivot.
void project_l1_tail(Eigen::VectorXd& v, double budget, double* hint) {
  const Eigen::Index p = v.size();
  double s = 0.0;
  for (Eigen::Index j = 1; j < p; ++j) s += std::abs(v[j]);
  if (s <= budget) return;
  if (budget == 0.0) {
    v.tail(p - 1).setZero();
    return;
  }
  double tau = -1.0;
  if (hint && *hint >= 0.0) {
    tau = warm_threshold(v, budget, *hint,
                         [](double x) { return std::abs(x); });
  }
  if (tau < 0.0) {
    std::vector<double> mags(static_cast<std::size_t>(p - 1));
    for (Eigen::Index j = 1; j < p; ++j) {
      mags[static_cast<std::size_t>(j - 1)] = std::abs(v[j]);
    }
    tau = pivot_threshold(mags, budget);
  }
  if (hint) *hint = tau;
  for (Eigen::Index j = 1; j < p; ++j) {
    const double mag = std::abs(v[j]) - tau;
    v[j] = mag > 0.0 ? (v[j] > 0.0 ? mag : -mag) : 0.0;
  }
}

void project_capped_tail(Eigen::VectorXd& v, double budget, double* hint) {
  const Eigen::Index p = v.size();
  double s = 0.0;
  for (Eigen::Index j = 1; j < p; ++j) {
    v[j] = std::max(v[j], 0.0);
    s += v[j];
  }
  if (s <= budget) return;
  if (budget == 0.0) {
    v.tail(p - 1).setZero();
    return;
  }
  double tau = -1.0;
  if (hint && *hint >= 0.0) {
    tau = warm_threshold(v, budget, *hint, [](double x) { return x; });
  }
  if (tau < 0.0) {
    std::vector<double> mags(v.data() + 1, v.data() + p);
    tau = pivot_threshold(mags, budget);
  }
  if (hint) *hint = tau;
  for (Eigen::Index j = 1; j < p; ++j) v[j] = std::max(v[j] - tau, 0.0);
}

}  // namespace

void project_nonneg_except_first(Eigen::VectorXd& v) {
  for (Eigen::Index j = 1; j < v.size(); ++j) v[j] = std::max(v[j], 0.0);
}

void project_l1_ball_except_first(Eigen::VectorXd& v, double budget) {
  check_budget(budget);
  project_l1_tail(v, budget, nullptr);
}

void project_capped_simplex_except_first(Eigen::VectorXd& v, double budget) {
  check_budget(budget);
  project_capped_tail(v, budget, nullptr);
}

double estimate_lipschitz(const LinearOperator& a, int iters) {
  if (a.cols == 0 || a.rows == 0) return 0.0;
  std::mt19937_64 rng(0x6a09e667f3bcc908ull);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(a.cols);
  for (Eigen::Index j = 0; j < a.cols; ++j) v[j] = u(rng);
  v.normalize();
  Eigen::VectorXd av(a.rows), w(a.cols);
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    a.apply(v, av);
    a.transpose_apply(av, w);
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return 1.05 * lam;
}

double kkt_residual(const Eigen::VectorXd& beta, const Eigen::VectorXd& g,
                    ConstraintKind kind, double budget, double boundary_tol) {
  const Eigen::Index p = beta.size();
  double r = std::abs(g[0]);
  switch (kind) {
    case ConstraintKind::kNonnegTail: {
      for (Eigen::Index j = 1; j < p; ++j) {
        r = std::max(r, std::max(-g[j], 0.0));
        r = std::max(r, std::abs(g[j] * beta[j]) / (1.0 + std::abs(beta[j])));
      }
      break;
    }
    case ConstraintKind::kL1BallTail: {
      double s = 0.0;
      for (Eigen::Index j = 1; j < p; ++j) s += std::abs(beta[j]);
      if (s < budget - boundary_tol) {
        for (Eigen::Index j = 1; j < p; ++j) r = std::max(r, std::abs(g[j]));
      } else {
        double lam = 0.0;
        for (Eigen::Index j = 1; j < p; ++j) lam = std::max(lam, std::abs(g[j]));
        for (Eigen::Index j = 1; j < p; ++j) {
          if (beta[j] != 0.0) {
            r = std::max(r, std::abs(g[j] + (beta[j] > 0.0 ? lam : -lam)));
          }
        }
      }
      break;
    }
    case ConstraintKind::kCappedSimplexTail: {
      double s = 0.0;
      for (Eigen::Index j = 1; j < p; ++j) s += beta[j];
      if (s < budget - boundary_tol) {
        for (Eigen::Index j = 1; j < p; ++j) {
          r = std::max(r, std::max(-g[j], 0.0));
          r = std::max(r, std::abs(g[j] * beta[j]) / (1.0 + std::abs(beta[j])));
        }
      } else {
        double mu = 0.0;
        for (Eigen::Index j = 1; j < p; ++j) mu = std::max(mu, -g[j]);
        mu = std::max(mu, 0.0);
        for (Eigen::Index j = 1; j < p; ++j) {
          r = std::max(r, std::abs((g[j] + mu) * beta[j]) / (1.0 + beta[j]));
        }
      }
      break;
    }
  }
  return r;
}

SolveResult solve_constrained_ls(const LinearOperator& a,
                                 const Eigen::VectorXd& y, ConstraintKind kind,
                                 double budget, const SolverConfig& cfg) {
  if (a.rows != y.size()) {
    throw std::invalid_argument("solve_constrained_ls: size mismatch");
  }
  if (!y.allFinite()) {
    throw std::invalid_argument("solve_constrained_ls: non-finite data");
  }
  if (kind != ConstraintKind::kNonnegTail) check_budget(budget);
  const Eigen::Index p = a.cols;
  if (p == 0 || a.rows == 0) {
    throw std::invalid_argument("solve_constrained_ls: empty design");
  }

  double tau_hint = -1.0;
  auto project = [&](Eigen::VectorXd& v) {
    switch (kind) {
      case ConstraintKind::kNonnegTail:
        project_nonneg_except_first(v);
        break;
      case ConstraintKind::kL1BallTail:
        project_l1_tail(v, budget, &tau_hint);
        break;
      case ConstraintKind::kCappedSimplexTail:
        project_capped_tail(v, budget, &tau_hint);
        break;
    }
  };

  const double lam = estimate_lipschitz(a, cfg.lipschitz_power_iters);
  double step = lam > 0.0 ? 1.0 / (2.0 * lam) : 1.0;  // gradient factor 2 folded in

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta[0] = y.mean();
  project(beta);

  Eigen::VectorXd az(a.rows), resid(a.rows), g(p), cand(p), z = beta;
  auto objective_at = [&](const Eigen::VectorXd& v) {
    a.apply(v, az);
    resid = az - y;
    return resid.squaredNorm();
  };
  // cand = projection of (from - 2 s g); the dominant clamp case is fused
  // into the step to avoid an extra pass over the coefficients.
  auto project_step = [&](const Eigen::VectorXd& from, double s) {
    if (kind == ConstraintKind::kNonnegTail) {
      const double head = from[0] - 2.0 * s * g[0];
      cand = (from - 2.0 * s * g).cwiseMax(0.0);
      cand[0] = head;
    } else {
      cand = from - 2.0 * s * g;
      project(cand);
    }
  };

  double obj = objective_at(beta);
  double t = 1.0;
  // Residuals at the current and extrapolated points. Linearity gives the
  // extrapolated residual from the last two iterates, so each iteration
  // needs one forward and one adjoint application.
  Eigen::VectorXd resid_beta = resid;
  Eigen::VectorXd resid_z = resid;

  std::vector<double> window;
  window.reserve(cfg.max_iter + 1);
  window.push_back(obj);

  SolveResult out;
  out.kkt_residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  int last_kkt_check = 0;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    a.transpose_apply(resid_z, g);
    project_step(z, step);
    double obj_cand = objective_at(cand);

    // Increases below the floating point noise of the objective must not
    // trigger a restart; near the optimum they are permanent and restarting
    // on them strips the momentum that drives the last digits of accuracy.
    const double noise = 1e-12 * std::max(1.0, obj);
    if (obj_cand > obj + noise && cfg.restart) {
      // Momentum overshoot: drop it and take a plain step from beta. The
      // step keeps halving if the Lipschitz estimate proves too small.
      t = 1.0;
      a.transpose_apply(resid_beta, g);
      for (int tries = 0; tries < 60; ++tries) {
        project_step(beta, step);
        obj_cand = objective_at(cand);
        if (obj_cand <= obj + noise) break;
        step *= 0.5;
      }
      if (obj_cand > obj + noise) {
        cand = beta;
        obj_cand = obj;
        resid = resid_beta;
      }
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double omega = (t - 1.0) / t_next;
    z = cand + omega * (cand - beta);
    // resid holds A cand - y after the objective evaluations above.
    resid_z = (1.0 + omega) * resid - omega * resid_beta;
    beta.swap(cand);
    resid_beta = resid;
    t = t_next;
    obj = obj_cand;
    window.push_back(obj);

    const bool plateau =
        iter >= 10 &&
        window[static_cast<std::size_t>(iter - 10)] - obj <
            cfg.rel_tol * std::max(1.0, window[static_cast<std::size_t>(iter - 10)]);
    if ((plateau || iter - last_kkt_check >= 250) &&
        iter - last_kkt_check >= 10) {
      last_kkt_check = iter;
      a.transpose_apply(resid_beta, g);
      out.kkt_residual = kkt_residual(beta, g, kind, budget, cfg.kkt_tol);
      if (out.kkt_residual < cfg.kkt_tol) {
        out.converged = true;
        break;
      }
    }
  }

  if (!out.converged) {
    iter = cfg.max_iter;
    a.transpose_apply(resid_beta, g);
    out.kkt_residual = kkt_residual(beta, g, kind, budget, cfg.kkt_tol);
  }
  out.beta = std::move(beta);
  out.objective = obj;
  out.iterations = iter;
  return out;
}

}  // namespace hkreg
