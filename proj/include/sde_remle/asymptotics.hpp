#pragma once

// Monte Carlo estimators of Fisher information and Kullback-Leibler
// divergence at a design point (x, T), their averages along converging
// designs, and the experiment engines that check consistency, asymptotic
// normality and moment continuity of the MLE.
//
// Every design point is sampled with the same replicate streams
// (seed, r, kMonteCarloReplicate): estimates at different points are paired
// (common random numbers), so their differences are much less noisy than
// the estimates themselves. Standard errors are delete-one jackknife over
// replicates.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sde_remle/error.hpp"
#include "sde_remle/likelihood.hpp"
#include "sde_remle/mle.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/parallel.hpp"
#include "sde_remle/path_simulator.hpp"
#include "sde_remle/statistics.hpp"
#include "sde_remle/suff_stats.hpp"

namespace sde_remle {

/// Replicate id reserved for the information/KL/probe samplers so they never
/// share streams with experiment fits.
inline constexpr std::uint64_t kMonteCarloReplicate = ~std::uint64_t{0};

struct InfoEstimate {
  Eigen::Matrix2d matrix = Eigen::Matrix2d::Zero();  // covariance of the score
  Eigen::Matrix2d mc_se = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d neg_mean_hessian = Eigen::Matrix2d::Zero();
  /// Jackknife se of (matrix - neg_mean_hessian), entrywise.
  Eigen::Matrix2d identity_se = Eigen::Matrix2d::Zero();
  std::size_t replicates = 0;
  std::size_t failures = 0;
  Subject design_point;
};

struct KlEstimate {
  double value = 0.0;
  double mc_se = 0.0;
  Theta theta0;
  Theta theta;
  Subject design_point;
  std::size_t replicates = 0;
  std::size_t failures = 0;
};

namespace detail {

/// Sufficient statistics of R subjects simulated at (x0, T) under theta;
/// nullopt marks a replicate whose simulation failed.
inline std::vector<std::optional<SuffStats>> sample_point(
    const ModelSpec& model, const Theta& theta, double x0, double T, double dt,
    std::size_t replicates, std::uint64_t seed, unsigned threads) {
  require_variance(theta);
  std::vector<std::optional<SuffStats>> out(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    const RngStream rng{seed, r, kMonteCarloReplicate};
    const double phi = draw_random_effects(theta, 1, rng).front().phi;
    try {
      const Path path = euler_maruyama(model, phi, x0, T, dt, rng);
      out[r] = compute_suff_stats(path, model);
    } catch (const SimulationDiverged&) {
      out[r].reset();
    } catch (const DegenerateDiffusion&) {
      out[r].reset();
    }
  });
  return out;
}

inline void require_replicates(std::size_t replicates) {
  if (replicates < 100)
    throw InvalidArgument("Monte Carlo estimates need at least 100 replicates");
}

/// Symmetric 2x2 entries in the order (0,0), (0,1), (1,1).
inline constexpr std::array<std::pair<int, int>, 3> kEntries{
    std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 1}};

struct InfoJackknife {
  std::array<Jackknifed, 3> cov;
  std::array<Jackknifed, 3> neg_hess;
};

/// Score covariance and minus mean Hessian with delete-one replicates.
inline InfoJackknife info_jackknife(std::span<const ScoreHess> sample) {
  const std::size_t r = sample.size();
  if (r < 3) throw InvalidArgument("information estimate needs >= 3 replicates");
  const double rd = static_cast<double>(r);

  CompensatedSum m0, m1;
  for (const auto& s : sample) {
    m0 += s.score[0];
    m1 += s.score[1];
  }
  const Eigen::Vector2d mean(m0.value() / rd, m1.value() / rd);

  std::array<CompensatedSum, 3> css, hss;
  for (const auto& s : sample) {
    const Eigen::Vector2d d = s.score - mean;
    for (std::size_t e = 0; e < 3; ++e) {
      const auto [i, j] = kEntries[e];
      css[e] += d[i] * d[j];
      hss[e] += -s.hess(i, j);
    }
  }

  InfoJackknife out;
  for (std::size_t e = 0; e < 3; ++e) {
    const auto [i, j] = kEntries[e];
    const double cross = css[e].value();
    const double hsum = hss[e].value();
    out.cov[e] = {cross / (rd - 1.0), std::vector<double>(r)};
    out.neg_hess[e] = {hsum / rd, std::vector<double>(r)};
    for (std::size_t k = 0; k < r; ++k) {
      const Eigen::Vector2d d = sample[k].score - mean;
      out.cov[e].loo[k] = (cross - d[i] * d[j] * rd / (rd - 1.0)) / (rd - 2.0);
      out.neg_hess[e].loo[k] = (hsum + sample[k].hess(i, j)) / (rd - 1.0);
    }
  }
  return out;
}

inline Eigen::Matrix2d symmetric(const std::array<double, 3>& e) {
  Eigen::Matrix2d m;
  m << e[0], e[1], e[1], e[2];
  return m;
}

template <class F>
Eigen::Matrix2d entrywise(F&& f) {
  return symmetric({f(0), f(1), f(2)});
}

inline std::vector<ScoreHess> scores_at(
    std::span<const std::optional<SuffStats>> sample, const Theta& theta) {
  std::vector<ScoreHess> out;
  out.reserve(sample.size());
  for (const auto& s : sample)
    if (s) out.push_back(score_hess(*s, theta));
  return out;
}

inline std::size_t count_failures(std::span<const std::optional<SuffStats>> sample) {
  std::size_t n = 0;
  for (const auto& s : sample) n += s ? 0 : 1;
  return n;
}

}  // namespace detail

/// Fisher information at (x0, T) as the sample covariance of the score
/// vector (gamma, (gamma^2 - I)/2) over R subjects simulated under theta.
inline InfoEstimate fisher_info_mc(const ModelSpec& model, const Theta& theta,
                                   double x0, double T, double dt,
                                   std::size_t replicates, std::uint64_t seed,
                                   unsigned threads = 1) {
  detail::require_replicates(replicates);
  const auto sample =
      detail::sample_point(model, theta, x0, T, dt, replicates, seed, threads);
  const auto scores = detail::scores_at(sample, theta);
  const auto jk = detail::info_jackknife(scores);

  InfoEstimate est;
  est.matrix = detail::entrywise([&](int e) { return jk.cov[e].full; });
  est.mc_se = detail::entrywise([&](int e) { return jk.cov[e].se(); });
  est.neg_mean_hessian = detail::entrywise([&](int e) { return jk.neg_hess[e].full; });
  est.identity_se =
      detail::entrywise([&](int e) { return (jk.cov[e] - jk.neg_hess[e]).se(); });
  est.replicates = scores.size();
  est.failures = detail::count_failures(sample);
  est.design_point = {x0, T};
  return est;
}

/// Mean log density ratio log lambda(theta0) - log lambda(theta) over R
/// subjects simulated under theta0.
inline KlEstimate kl_mc(const ModelSpec& model, const Theta& theta0,
                        const Theta& theta, double x0, double T, double dt,
                        std::size_t replicates, std::uint64_t seed,
                        unsigned threads = 1) {
  detail::require_replicates(replicates);
  require_variance(theta);
  const auto sample =
      detail::sample_point(model, theta0, x0, T, dt, replicates, seed, threads);
  std::vector<double> ratios;
  ratios.reserve(sample.size());
  for (const auto& s : sample)
    if (s) ratios.push_back(log_density_ratio(*s, theta0, theta));
  const auto jk = jackknife_mean(ratios);
  return {jk.full, jk.se(), theta0, theta, {x0, T}, ratios.size(),
          detail::count_failures(sample)};
}

/// x_i = x_inf + a/i, T_i = T_inf + b/i for i = 1, 2, ...
struct DesignSequence {
  double x_inf = 0.0;
  double T_inf = 1.0;
  double a = 1.0;
  double b = 1.0;

  Subject at(std::size_t i) const {
    const double inv = 1.0 / static_cast<double>(i);
    return {x_inf + a * inv, T_inf + b * inv};
  }
  Subject limit() const { return {x_inf, T_inf}; }
};

/// One row of the averaged-limit table: n^-1 sum_k of the per-point
/// quantities, their gap to the limit point, and the change since the
/// previous row (step). Gaps are absolute values; all se are jackknife.
struct LimitRow {
  std::size_t n = 0;
  double kl_avg = 0.0;
  double kl_se = 0.0;
  double kl_gap = 0.0;
  double kl_gap_se = 0.0;
  double kl_step = 0.0;
  double kl_step_se = 0.0;
  Eigen::Matrix2d info_avg = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_se = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_gap = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_gap_se = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_step = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_step_se = Eigen::Matrix2d::Zero();
};

struct LimitTable {
  std::vector<LimitRow> rows;
  double kl_limit = 0.0;
  double kl_limit_se = 0.0;
  Eigen::Matrix2d info_limit = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d info_limit_se = Eigen::Matrix2d::Zero();
  std::size_t replicates = 0;
  std::size_t failures = 0;
};

/// Averaged KL divergence K(theta0, theta) and Fisher information at theta0
/// over designs[0..n) for every n in the (ascending) schedule, compared with
/// the values at `limit`.
inline LimitTable averaged_limits(const ModelSpec& model,
                                  std::span<const Subject> designs,
                                  const Subject& limit, const Theta& theta0,
                                  const Theta& theta, double dt,
                                  std::size_t replicates, std::uint64_t seed,
                                  std::span<const std::size_t> n_schedule,
                                  unsigned threads = 1) {
  detail::require_replicates(replicates);
  require_variance(theta);
  if (n_schedule.empty()) throw InvalidArgument("empty n schedule");
  for (std::size_t i = 0; i < n_schedule.size(); ++i) {
    if (n_schedule[i] == 0 || (i > 0 && n_schedule[i] <= n_schedule[i - 1]))
      throw InvalidArgument("n schedule must be positive and increasing");
  }
  const std::size_t n_max = n_schedule.back();
  if (designs.size() < n_max)
    throw InvalidArgument("fewer design points than the largest n");

  // Point 0 is the limit, points 1..n_max the design sequence.
  std::vector<std::vector<std::optional<SuffStats>>> samples;
  samples.reserve(n_max + 1);
  samples.push_back(detail::sample_point(model, theta0, limit.x0, limit.T, dt,
                                         replicates, seed, threads));
  for (std::size_t k = 0; k < n_max; ++k)
    samples.push_back(detail::sample_point(model, theta0, designs[k].x0,
                                           designs[k].T, dt, replicates, seed,
                                           threads));

  // Pairing needs the same replicates at every point.
  std::vector<bool> keep(replicates, true);
  for (const auto& s : samples)
    for (std::size_t r = 0; r < replicates; ++r)
      if (!s[r]) keep[r] = false;
  const std::size_t kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));

  struct PointJackknife {
    std::array<Jackknifed, 3> info;
    Jackknifed kl;
  };
  auto point = [&](const std::vector<std::optional<SuffStats>>& s) {
    std::vector<ScoreHess> scores;
    std::vector<double> ratios;
    scores.reserve(kept);
    ratios.reserve(kept);
    for (std::size_t r = 0; r < replicates; ++r) {
      if (!keep[r]) continue;
      scores.push_back(score_hess(*s[r], theta0));
      ratios.push_back(log_density_ratio(*s[r], theta0, theta));
    }
    return PointJackknife{detail::info_jackknife(scores).cov,
                          jackknife_mean(ratios)};
  };

  LimitTable table;
  table.replicates = kept;
  table.failures = replicates - kept;
  const PointJackknife lim = point(samples[0]);
  table.kl_limit = lim.kl.full;
  table.kl_limit_se = lim.kl.se();
  table.info_limit = detail::entrywise([&](int e) { return lim.info[e].full; });
  table.info_limit_se = detail::entrywise([&](int e) { return lim.info[e].se(); });

  auto zero = [&] { return Jackknifed{0.0, std::vector<double>(kept, 0.0)}; };
  std::array<Jackknifed, 3> info_sum{zero(), zero(), zero()};
  Jackknifed kl_sum = zero();
  auto accumulate = [](Jackknifed& acc, const Jackknifed& x) {
    acc.full += x.full;
    for (std::size_t i = 0; i < acc.loo.size(); ++i) acc.loo[i] += x.loo[i];
  };
  auto scaled = [](const Jackknifed& x, double c) {
    Jackknifed out{x.full * c, x.loo};
    for (auto& v : out.loo) v *= c;
    return out;
  };

  std::optional<std::array<Jackknifed, 3>> prev_info;
  std::optional<Jackknifed> prev_kl;
  std::size_t next = 0;
  for (std::size_t k = 1; k <= n_max; ++k) {
    const PointJackknife pj = point(samples[k]);
    for (std::size_t e = 0; e < 3; ++e) accumulate(info_sum[e], pj.info[e]);
    accumulate(kl_sum, pj.kl);
    if (k != n_schedule[next]) continue;
    ++next;

    const double inv = 1.0 / static_cast<double>(k);
    std::array<Jackknifed, 3> info_avg{scaled(info_sum[0], inv),
                                       scaled(info_sum[1], inv),
                                       scaled(info_sum[2], inv)};
    const Jackknifed kl_avg = scaled(kl_sum, inv);

    LimitRow row;
    row.n = k;
    row.kl_avg = kl_avg.full;
    row.kl_se = kl_avg.se();
    const Jackknifed kl_gap = kl_avg - lim.kl;
    row.kl_gap = std::abs(kl_gap.full);
    row.kl_gap_se = kl_gap.se();
    if (prev_kl) {
      const Jackknifed step = kl_avg - *prev_kl;
      row.kl_step = step.full;
      row.kl_step_se = step.se();
    }
    row.info_avg = detail::entrywise([&](int e) { return info_avg[e].full; });
    row.info_se = detail::entrywise([&](int e) { return info_avg[e].se(); });
    row.info_gap = detail::entrywise(
        [&](int e) { return std::abs((info_avg[e] - lim.info[e]).full); });
    row.info_gap_se = detail::entrywise(
        [&](int e) { return (info_avg[e] - lim.info[e]).se(); });
    if (prev_info) {
      row.info_step = detail::entrywise(
          [&](int e) { return (info_avg[e] - (*prev_info)[e]).full; });
      row.info_step_se = detail::entrywise(
          [&](int e) { return (info_avg[e] - (*prev_info)[e]).se(); });
    }
    table.rows.push_back(row);
    prev_info = info_avg;
    prev_kl = kl_avg;
  }
  return table;
}

inline LimitTable averaged_limits(const ModelSpec& model,
                                  const DesignSequence& sequence,
                                  const Theta& theta0, const Theta& theta,
                                  double dt, std::size_t replicates,
                                  std::uint64_t seed,
                                  std::span<const std::size_t> n_schedule,
                                  unsigned threads = 1) {
  if (n_schedule.empty()) throw InvalidArgument("empty n schedule");
  std::vector<Subject> designs;
  for (std::size_t i = 1; i <= n_schedule.back(); ++i)
    designs.push_back(sequence.at(i));
  return averaged_limits(model, designs, sequence.limit(), theta0, theta, dt,
                         replicates, seed, n_schedule, threads);
}

// ---------------------------------------------------------------------------
// Experiments

enum class DesignKind { iid, converging };

struct ExperimentConfig {
  std::string model = "unit";
  Theta theta0{1.0, 0.5};
  ParamSpace space{};
  DesignKind design = DesignKind::iid;
  double x0 = 1.0;  // iid design
  double T = 1.0;
  DesignSequence sequence{};  // converging design
  double dt = 0.01;
  std::uint64_t seed = 0;
  std::size_t replicates = 100;
  std::vector<std::size_t> n_schedule{50, 200, 800};
  std::size_t info_replicates = 2000;
  std::size_t audit_grid = 50;
  unsigned threads = 1;
};

struct ReplicateRecord {
  std::size_t rep = 0;
  std::size_t n = 0;
  Theta theta_hat;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  BoundaryFlags boundary;
  std::array<bool, 2> covered{false, false};
  double error = 0.0;  // Euclidean distance to theta0
};

struct ReplicateFailure {
  std::size_t rep = 0;
  std::size_t n = 0;
  std::string message;
};

/// ks_* are KS p-values of the z-scores against N(0, 1); cov_* are
/// empirical coverages of the 95% Wald intervals (no interval counts as a
/// miss).
struct SummaryRow {
  std::size_t n = 0;
  double med_err = 0.0;
  double p90_err = 0.0;
  double ks_mu = 0.0;
  double ks_omega2 = 0.0;
  double cov_mu = 0.0;
  double cov_omega2 = 0.0;
};

struct ExperimentReport {
  std::string kind;
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;
  std::vector<ReplicateFailure> failures;
  std::vector<SummaryRow> summary;
  /// Per-subject information used to standardize each n level.
  std::vector<Eigen::Matrix2d> info_plugin;
  bool failed = false;
};

/// Symmetric square root of a positive semi-definite 2x2 matrix.
inline Eigen::Matrix2d sqrt_psd(const Eigen::Matrix2d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
  const Eigen::Vector2d root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

inline Eigen::Vector2d standardize(const Theta& theta_hat, const Theta& center,
                                   const Eigen::Matrix2d& info, std::size_t n) {
  const Eigen::Vector2d diff(theta_hat.mu - center.mu,
                             theta_hat.omega2 - center.omega2);
  return std::sqrt(static_cast<double>(n)) * (sqrt_psd(info) * diff);
}

namespace detail {

inline Design experiment_design(const ExperimentConfig& cfg, std::size_t n) {
  Design d = cfg.design == DesignKind::iid
                 ? Design::iid(n, cfg.x0, cfg.T, cfg.dt, cfg.seed)
                 : Design::converging(n, cfg.sequence.x_inf, cfg.sequence.T_inf,
                                      cfg.sequence.a, cfg.sequence.b, cfg.dt,
                                      cfg.seed);
  d.validate();
  return d;
}

inline Eigen::Matrix2d information_plugin(const ModelSpec& model,
                                          const ExperimentConfig& cfg,
                                          std::size_t n) {
  if (cfg.design == DesignKind::iid)
    return fisher_info_mc(model, cfg.theta0, cfg.x0, cfg.T, cfg.dt,
                          cfg.info_replicates, cfg.seed, cfg.threads)
        .matrix;
  const std::array<std::size_t, 1> schedule{n};
  return averaged_limits(model, cfg.sequence, cfg.theta0, cfg.theta0, cfg.dt,
                         cfg.info_replicates, cfg.seed, schedule, cfg.threads)
      .rows.front()
      .info_avg;
}

inline ExperimentReport run_fit_experiment(const ExperimentConfig& cfg,
                                           std::string kind) {
  if (cfg.replicates == 0) throw EmptyExperiment("experiment with 0 replicates");
  if (cfg.n_schedule.empty()) throw InvalidArgument("experiment needs an n schedule");
  cfg.space.validate();
  require_variance(cfg.theta0);
  if (!cfg.space.interior(cfg.theta0))
    throw InvalidArgument(
        "true theta must lie in the interior of the parameter space");
  if (cfg.replicates >= (std::uint64_t{1} << 32) || cfg.n_schedule.size() >= (1u << 31))
    throw InvalidArgument("too many replicates or n levels");
  const ModelSpec model = builtin_model(cfg.model);

  ExperimentReport report;
  report.kind = std::move(kind);
  report.config = cfg;
  FitOptions fit_opts;
  fit_opts.audit_grid = cfg.audit_grid;

  for (std::size_t level = 0; level < cfg.n_schedule.size(); ++level) {
    const std::size_t n = cfg.n_schedule[level];
    if (n == 0) throw InvalidArgument("n levels must be positive");
    const Design design = experiment_design(cfg, n);
    const Eigen::Matrix2d info = information_plugin(model, cfg, n);
    report.info_plugin.push_back(info);

    std::vector<std::optional<ReplicateRecord>> slots(cfg.replicates);
    std::vector<std::string> errors(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
      const std::uint64_t replicate_id = (std::uint64_t{level} << 32) | r;
      try {
        const auto paths = simulate_ensemble(model, cfg.theta0, design, replicate_id);
        std::vector<SuffStats> stats;
        stats.reserve(paths.size());
        for (const auto& p : paths) stats.push_back(compute_suff_stats(p, model));
        const MleFit fit = fit_mle(stats, cfg.space, fit_opts);
        ReplicateRecord rec;
        rec.rep = r;
        rec.n = n;
        rec.theta_hat = fit.theta_hat;
        rec.z = standardize(fit.theta_hat, cfg.theta0, info, n);
        rec.boundary = fit.boundary;
        if (fit.wald_se) {
          const auto& se = *fit.wald_se;
          rec.covered = {
              std::abs(fit.theta_hat.mu - cfg.theta0.mu) <= kZ975 * se[0],
              std::abs(fit.theta_hat.omega2 - cfg.theta0.omega2) <= kZ975 * se[1]};
        }
        rec.error = std::hypot(fit.theta_hat.mu - cfg.theta0.mu,
                               fit.theta_hat.omega2 - cfg.theta0.omega2);
        slots[r] = rec;
      } catch (const Error& e) {
        errors[r] = e.what();
      }
    });

    std::vector<double> err, z_mu, z_w;
    std::size_t cov_mu = 0, cov_w = 0;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      if (!slots[r]) {
        report.failures.push_back({r, n, errors[r]});
        continue;
      }
      const auto& rec = *slots[r];
      report.records.push_back(rec);
      err.push_back(rec.error);
      z_mu.push_back(rec.z[0]);
      z_w.push_back(rec.z[1]);
      cov_mu += rec.covered[0];
      cov_w += rec.covered[1];
    }
    SummaryRow row;
    row.n = n;
    if (!err.empty()) {
      const double m = static_cast<double>(err.size());
      row.med_err = median(err);
      row.p90_err = quantile(err, 0.9);
      row.ks_mu = ks_standard_normal(z_mu).p_value;
      row.ks_omega2 = ks_standard_normal(z_w).p_value;
      row.cov_mu = static_cast<double>(cov_mu) / m;
      row.cov_omega2 = static_cast<double>(cov_w) / m;
    }
    report.summary.push_back(row);
  }

  const double total = static_cast<double>(cfg.replicates * cfg.n_schedule.size());
  report.failed = static_cast<double>(report.failures.size()) > 0.01 * total;
  return report;
}

}  // namespace detail

/// For each n in the schedule, R independent ensembles simulated under
/// theta0 and fitted; reports error quantiles, z-score KS p-values and Wald
/// coverage per n.
inline ExperimentReport run_consistency_experiment(const ExperimentConfig& cfg) {
  return detail::run_fit_experiment(cfg, "consistency");
}

/// Same engine; the z-scores sqrt(n) I^{1/2} (theta_hat - theta0) use the
/// Monte Carlo information at the design point (iid) or averaged over the
/// first n design points (converging designs).
inline ExperimentReport run_normality_experiment(const ExperimentConfig& cfg) {
  return detail::run_fit_experiment(
      cfg, cfg.design == DesignKind::iid ? "normality" : "noniid");
}

/// KS p-values (mu, omega2) of the z-scores of level `level` recentred at
/// `center`. Used as a negative control with a deliberately wrong center.
inline std::array<KsResult, 2> ks_against_center(const ExperimentReport& report,
                                                 std::size_t level,
                                                 const Theta& center) {
  if (level >= report.summary.size()) throw InvalidArgument("no such n level");
  const std::size_t n = report.summary[level].n;
  std::vector<double> z_mu, z_w;
  for (const auto& rec : report.records) {
    if (rec.n != n) continue;
    const auto z = standardize(rec.theta_hat, center, report.info_plugin[level], n);
    z_mu.push_back(z[0]);
    z_w.push_back(z[1]);
  }
  if (z_mu.empty()) throw EmptyExperiment("no replicates at this n level");
  return {ks_standard_normal(z_mu), ks_standard_normal(z_w)};
}

// ---------------------------------------------------------------------------
// Moment continuity probe

struct ProbeConfig {
  std::string model = "unit";
  Theta theta0{1.0, 0.5};
  double x_tilde = 0.0;
  double T_tilde = 1.0;
  double a = 1.0;  // x_m = x_tilde + a/m
  double b = 1.0;  // T_m = T_tilde + b/m
  double psi = 1.0;
  double xi = 1.0;
  std::vector<std::size_t> m_schedule{1, 2, 4, 8, 16};
  std::vector<int> powers{1, 2};
  double dt = 0.01;
  std::size_t replicates = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// E[h(U, V)^k] with h(u, v) = exp(psi u / (1 + xi v)) at (x_m, T_m), and its
/// gap to the estimate at (x_tilde, T_tilde). mc_se is the se of the
/// estimate; gap_se and step_se are se of the paired differences (step is
/// the change since the previous m of the same power).
struct ProbeRow {
  std::size_t m = 0;
  int power = 1;
  double x = 0.0;
  double T = 0.0;
  double estimate = 0.0;
  double mc_se = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;
  double step = 0.0;
  double step_se = 0.0;
};

struct ProbeTable {
  std::vector<ProbeRow> rows;
  std::vector<int> powers;
  std::vector<double> limit_estimate;  // one per power
  std::vector<double> limit_se;
  std::size_t replicates = 0;
  std::size_t failures = 0;
};

inline double continuity_h(double u, double v, double psi, double xi) {
  return std::exp(psi * u / (1.0 + xi * v));
}

inline ProbeTable run_moment_continuity_probe(const ProbeConfig& cfg) {
  detail::require_replicates(cfg.replicates);
  if (!(cfg.xi > 0.0)) throw InvalidArgument("probe needs xi > 0");
  if (cfg.m_schedule.empty() || cfg.powers.empty())
    throw InvalidArgument("probe needs m schedule and powers");
  for (int k : cfg.powers)
    if (k < 1) throw InvalidArgument("probe powers must be >= 1");
  const ModelSpec model = builtin_model(cfg.model);

  auto sample = [&](double x, double T) {
    return detail::sample_point(model, cfg.theta0, x, T, cfg.dt, cfg.replicates,
                                cfg.seed, cfg.threads);
  };
  std::vector<std::vector<std::optional<SuffStats>>> samples;
  samples.push_back(sample(cfg.x_tilde, cfg.T_tilde));
  for (std::size_t m : cfg.m_schedule) {
    if (m == 0) throw InvalidArgument("probe m must be positive");
    const double inv = 1.0 / static_cast<double>(m);
    samples.push_back(sample(cfg.x_tilde + cfg.a * inv, cfg.T_tilde + cfg.b * inv));
  }
  std::vector<bool> keep(cfg.replicates, true);
  for (const auto& s : samples)
    for (std::size_t r = 0; r < cfg.replicates; ++r)
      if (!s[r]) keep[r] = false;

  auto moment = [&](const std::vector<std::optional<SuffStats>>& s, int k) {
    std::vector<double> values;
    for (std::size_t r = 0; r < cfg.replicates; ++r)
      if (keep[r])
        values.push_back(
            std::pow(continuity_h(s[r]->u, s[r]->v, cfg.psi, cfg.xi), k));
    return jackknife_mean(values);
  };

  ProbeTable table;
  table.powers = cfg.powers;
  table.replicates = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  table.failures = cfg.replicates - table.replicates;
  for (int k : cfg.powers) {
    const Jackknifed lim = moment(samples[0], k);
    table.limit_estimate.push_back(lim.full);
    table.limit_se.push_back(lim.se());
    std::optional<Jackknifed> prev;
    for (std::size_t i = 0; i < cfg.m_schedule.size(); ++i) {
      const std::size_t m = cfg.m_schedule[i];
      const double inv = 1.0 / static_cast<double>(m);
      const Jackknifed est = moment(samples[i + 1], k);
      const Jackknifed gap = est - lim;
      ProbeRow row{m, k, cfg.x_tilde + cfg.a * inv, cfg.T_tilde + cfg.b * inv,
                   est.full, est.se(), std::abs(gap.full), gap.se()};
      if (prev) {
        const Jackknifed step = est - *prev;
        row.step = step.full;
        row.step_se = step.se();
      }
      table.rows.push_back(row);
      prev = est;
    }
  }
  return table;
}

}  // namespace sde_remle
