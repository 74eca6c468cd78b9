#pragma once

// Closed-form per-subject likelihood of the Gaussian random-effects model
// and its derivatives, all functions of (U, V, mu, omega2).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>

#include "sde_remle/error.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/statistics.hpp"
#include "sde_remle/suff_stats.hpp"

namespace sde_remle {

/// Score and Hessian of log lambda in (mu, omega2).
struct ScoreHess {
  double gamma = 0.0;  // (U - mu V) / (1 + omega2 V)
  double info = 0.0;   // V / (1 + omega2 V)
  Eigen::Vector2d score = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

/// A subject with V = 0 but U != 0 cannot come from any path; its U^2/(2V)
/// term is undefined.
inline bool inconsistent_stats(const SuffStats& s) noexcept {
  return s.v == 0.0 && s.u != 0.0;
}

/// log lambda = -1/2 log(1 + w V) + (2 mu U - mu^2 V + w U^2) / (2 (1 + w V)),
/// the rational form of the Gaussian-mixture likelihood that stays finite as
/// V -> 0. Returns +inf for inconsistent (V = 0, U != 0) input.
inline double log_lambda(const SuffStats& s, const Theta& theta) {
  if (inconsistent_stats(s)) return std::numeric_limits<double>::infinity();
  const double d = 1.0 + theta.omega2 * s.v;
  return -0.5 * std::log1p(theta.omega2 * s.v) +
         (2.0 * theta.mu * s.u - theta.mu * theta.mu * s.v +
          theta.omega2 * s.u * s.u) /
             (2.0 * d);
}

inline ScoreHess score_hess(const SuffStats& s, const Theta& theta) {
  ScoreHess out;
  const double d = 1.0 + theta.omega2 * s.v;
  out.gamma = (s.u - theta.mu * s.v) / d;
  out.info = s.v / d;
  const double g = out.gamma;
  const double i = out.info;
  out.score << g, 0.5 * (g * g - i);
  out.hess << -i, -g * i, -g * i, -0.5 * (2.0 * g * g * i - i * i);
  return out;
}

/// log lambda(theta0) - log lambda(theta), evaluated term by term without
/// going through log_lambda. The U^2/(2V) terms cancel, so this is finite
/// for every V >= 0.
inline double log_density_ratio(const SuffStats& s, const Theta& theta0,
                                const Theta& theta) {
  if (theta.mu == theta0.mu && theta.omega2 == theta0.omega2) return 0.0;
  const double d = 1.0 + theta.omega2 * s.v;
  const double d0 = 1.0 + theta0.omega2 * s.v;
  return 0.5 * (std::log1p(theta.omega2 * s.v) - std::log1p(theta0.omega2 * s.v)) +
         0.5 * (theta0.omega2 - theta.omega2) * s.u * s.u / (d * d0) +
         theta.mu * theta.mu * s.v / (2.0 * d) - theta.mu * s.u / d -
         theta0.mu * theta0.mu * s.v / (2.0 * d0) + theta0.mu * s.u / d0;
}

struct TotalLik {
  double loglik = 0.0;
  Eigen::Vector2d score = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

inline double total_loglik(std::span<const SuffStats> stats, const Theta& theta) {
  if (stats.empty()) throw EmptyEnsemble("total log-likelihood of no subjects");
  CompensatedSum sum;
  for (const auto& s : stats) sum += log_lambda(s, theta);
  return sum.value();
}

/// Log-likelihood with summed score and Hessian, reduced in subject order.
inline TotalLik total_loglik_derivs(std::span<const SuffStats> stats,
                                    const Theta& theta) {
  if (stats.empty()) throw EmptyEnsemble("total log-likelihood of no subjects");
  CompensatedSum ll, s0, s1, h00, h01, h11;
  for (const auto& s : stats) {
    ll += log_lambda(s, theta);
    const auto sh = score_hess(s, theta);
    s0 += sh.score[0];
    s1 += sh.score[1];
    h00 += sh.hess(0, 0);
    h01 += sh.hess(0, 1);
    h11 += sh.hess(1, 1);
  }
  TotalLik out;
  out.loglik = ll.value();
  out.score << s0.value(), s1.value();
  out.hess << h00.value(), h01.value(), h01.value(), h11.value();
  return out;
}

}  // namespace sde_remle
