#pragma once

// Maximum likelihood over a compact rectangle: closed-form profile in mu,
// golden-section search in omega2, then a projected Newton polish.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "sde_remle/error.hpp"
#include "sde_remle/likelihood.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/statistics.hpp"

namespace sde_remle {

struct BoundaryFlags {
  bool mu_lo = false;
  bool mu_hi = false;
  bool omega2_lo = false;
  bool omega2_hi = false;

  bool any() const noexcept { return mu_lo || mu_hi || omega2_lo || omega2_hi; }

  /// "none" or the active bounds joined with '+', e.g. "mu_hi+omega2_lo".
  std::string to_string() const {
    std::string out;
    auto add = [&out](bool on, const char* name) {
      if (!on) return;
      if (!out.empty()) out += '+';
      out += name;
    };
    add(mu_lo, "mu_lo");
    add(mu_hi, "mu_hi");
    add(omega2_lo, "omega2_lo");
    add(omega2_hi, "omega2_hi");
    return out.empty() ? "none" : out;
  }

  friend bool operator==(const BoundaryFlags&, const BoundaryFlags&) = default;
};

struct FitOptions {
  double bracket_rel_tol = 1e-6;
  int max_newton = 20;
  double flat_tol = 1e-12;
  /// Side of the post-fit audit grid over the parameter space; 0 disables.
  std::size_t audit_grid = 50;
};

struct MleFit {
  Theta theta_hat;
  double loglik = 0.0;
  double score_norm = 0.0;
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  BoundaryFlags boundary;
  std::optional<Eigen::Vector2d> wald_se;
  int iterations = 0;
  std::size_t n = 0;
  /// False when some audit grid point beat the fitted log-likelihood.
  bool audit_ok = true;
};

struct ProfileMu {
  double mu = 0.0;
  bool clamped = false;
};

/// argmax over mu of the log-likelihood at fixed omega2:
///   sum U_i/(1 + w V_i) / sum V_i/(1 + w V_i), clamped to [mu_lo, mu_hi].
inline ProfileMu profile_mu(double omega2, std::span<const SuffStats> stats,
                            const ParamSpace& space) {
  if (stats.empty()) throw EmptyEnsemble("profile of no subjects");
  CompensatedSum num, den;
  for (const auto& s : stats) {
    const double d = 1.0 + omega2 * s.v;
    num += s.u / d;
    den += s.v / d;
  }
  if (!(den.value() > 0.0))
    throw AllDegenerate("every subject has V = 0; mu is not identifiable");
  const double mu = num.value() / den.value();
  const double clamped = std::clamp(mu, space.mu_lo, space.mu_hi);
  return {clamped, clamped != mu};
}

namespace detail {

inline double profiled_loglik(double omega2, std::span<const SuffStats> stats,
                              const ParamSpace& space) {
  return total_loglik(stats, {profile_mu(omega2, stats, space).mu, omega2});
}

/// Maximizes g over [lo, hi]; ties go to the smaller argument.
template <class Objective>
double golden_section_max(Objective&& g, double lo, double hi, double tol,
                          double flat_tol, int& iterations) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  while (b - a > tol) {
    ++iterations;
    if (f1 >= f2 - flat_tol) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = g(x2);
    }
  }
  const double fa = g(a), fb = g(b);
  const double mid = 0.5 * (a + b);
  const double fm = g(mid);
  if (std::abs(fa - fb) < flat_tol && std::abs(fm - fa) < flat_tol) return a;
  double best = mid, fbest = fm;
  // The bracket only keeps an end of [lo, hi] if the maximum sits there.
  if (a == lo && fa >= fbest) best = a, fbest = fa;
  if (b == hi && fb > fbest) best = b, fbest = fb;
  return best;
}

inline BoundaryFlags boundary_of(const Theta& t, const ParamSpace& space) {
  return {t.mu == space.mu_lo, t.mu == space.mu_hi,
          t.omega2 == space.omega2_lo, t.omega2 == space.omega2_hi};
}

}  // namespace detail

inline MleFit fit_mle(std::span<const SuffStats> stats, const ParamSpace& space,
                      const FitOptions& opts = {}) {
  if (stats.empty()) throw EmptyEnsemble("cannot fit an empty ensemble");
  space.validate();
  for (const auto& s : stats) {
    if (inconsistent_stats(s) || !std::isfinite(s.u) || !std::isfinite(s.v))
      throw NonFiniteObjective("subject " + std::to_string(s.subject_index) +
                               " has non-finite likelihood (U = " +
                               std::to_string(s.u) +
                               ", V = " + std::to_string(s.v) + ")");
  }

  MleFit fit;
  fit.n = stats.size();
  const double tol = opts.bracket_rel_tol * (space.omega2_hi - space.omega2_lo);
  auto g = [&](double w) { return detail::profiled_loglik(w, stats, space); };
  const double w_hat = detail::golden_section_max(
      g, space.omega2_lo, space.omega2_hi, tol, opts.flat_tol, fit.iterations);
  Theta theta{profile_mu(w_hat, stats, space).mu, w_hat};
  TotalLik current = total_loglik_derivs(stats, theta);
  if (!std::isfinite(current.loglik))
    throw NonFiniteObjective("log-likelihood is not finite at the profile optimum");

  // Newton on the coordinates not pinned at a bound by an outward score.
  for (int it = 0; it < opts.max_newton; ++it) {
    const auto flags = detail::boundary_of(theta, space);
    const bool mu_free = !((flags.mu_lo && current.score[0] < 0.0) ||
                           (flags.mu_hi && current.score[0] > 0.0));
    const bool w_free = !((flags.omega2_lo && current.score[1] < 0.0) ||
                          (flags.omega2_hi && current.score[1] > 0.0));
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    const Eigen::Matrix2d& h = current.hess;
    if (mu_free && w_free) {
      if (!(h(0, 0) < 0.0 && h.determinant() > 0.0)) break;
      step = -h.inverse() * current.score;
    } else if (mu_free) {
      if (!(h(0, 0) < 0.0)) break;
      step[0] = -current.score[0] / h(0, 0);
    } else if (w_free) {
      if (!(h(1, 1) < 0.0)) break;
      step[1] = -current.score[1] / h(1, 1);
    } else {
      break;
    }
    const Theta trial =
        space.project({theta.mu + step[0], theta.omega2 + step[1]});
    if (trial == theta) break;
    const TotalLik next = total_loglik_derivs(stats, trial);
    ++fit.iterations;
    if (!(next.loglik >= current.loglik)) break;
    theta = trial;
    current = next;
  }

  fit.theta_hat = theta;
  fit.loglik = current.loglik;
  fit.hess = current.hess;
  fit.score_norm = current.score.cwiseAbs().maxCoeff();
  fit.boundary = detail::boundary_of(theta, space);

  if (!fit.boundary.any()) {
    const Eigen::Matrix2d neg = -current.hess;
    if (neg(0, 0) > 0.0 && neg.determinant() > 0.0) {
      const Eigen::Matrix2d cov = neg.inverse();
      fit.wald_se = Eigen::Vector2d(std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1)));
    }
  }

  if (opts.audit_grid > 1) {
    const double g_den = static_cast<double>(opts.audit_grid - 1);
    const double slack = 1e-9 * std::max(1.0, std::abs(fit.loglik));
    for (std::size_t i = 0; i < opts.audit_grid && fit.audit_ok; ++i) {
      const double mu =
          space.mu_lo + (space.mu_hi - space.mu_lo) * static_cast<double>(i) / g_den;
      for (std::size_t j = 0; j < opts.audit_grid; ++j) {
        const double w = space.omega2_lo + (space.omega2_hi - space.omega2_lo) *
                                               static_cast<double>(j) / g_den;
        if (total_loglik(stats, {mu, w}) > fit.loglik + slack) {
          fit.audit_ok = false;
          break;
        }
      }
    }
  }
  return fit;
}

}  // namespace sde_remle
