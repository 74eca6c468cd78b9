#pragma once

// CSV schemas produced and consumed by the tools. Reals are written in the
// shortest decimal form that parses back to the same double.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sde_remle/asymptotics.hpp"
#include "sde_remle/error.hpp"
#include "sde_remle/mle.hpp"
#include "sde_remle/path_simulator.hpp"
#include "sde_remle/suff_stats.hpp"
#include "sde_remle/text.hpp"

namespace sde_remle {

// ---------------------------------------------------------------------------
// Writers

inline void write_paths_csv(std::ostream& os, std::span<const Path> paths) {
  os << "subject,k,t,x\n";
  for (const auto& p : paths)
    for (std::size_t k = 0; k < p.times.size(); ++k)
      os << p.subject_index << ',' << k << ',' << format_double(p.times[k])
         << ',' << format_double(p.values[k]) << '\n';
}

inline void write_stats_csv(std::ostream& os, std::span<const SuffStats> stats) {
  os << "subject,u,v\n";
  for (const auto& s : stats)
    os << s.subject_index << ',' << format_double(s.u) << ','
       << format_double(s.v) << '\n';
}

inline constexpr std::string_view kFitHeader =
    "n,mu_hat,omega2_hat,loglik,score_norm,boundary,se_mu,se_omega2,iterations";

inline std::string fit_row(const MleFit& fit) {
  std::string row = std::to_string(fit.n) + ',' +
                    format_double(fit.theta_hat.mu) + ',' +
                    format_double(fit.theta_hat.omega2) + ',' +
                    format_double(fit.loglik) + ',' +
                    format_double(fit.score_norm) + ',' +
                    fit.boundary.to_string() + ',';
  if (fit.wald_se)
    row += format_double((*fit.wald_se)[0]) + ',' + format_double((*fit.wald_se)[1]);
  else
    row += "NA,NA";
  return row + ',' + std::to_string(fit.iterations);
}

inline void write_fit_csv(std::ostream& os, const MleFit& fit) {
  os << kFitHeader << '\n' << fit_row(fit) << '\n';
}

inline void write_replicates_csv(std::ostream& os, const ExperimentReport& report) {
  os << "rep,n,mu_hat,omega2_hat,z_mu,z_omega2,boundary\n";
  for (const auto& r : report.records)
    os << r.rep << ',' << r.n << ',' << format_double(r.theta_hat.mu) << ','
       << format_double(r.theta_hat.omega2) << ',' << format_double(r.z[0])
       << ',' << format_double(r.z[1]) << ',' << r.boundary.to_string() << '\n';
}

inline void write_summary_csv(std::ostream& os, const ExperimentReport& report) {
  os << "n,med_err,p90_err,ks_mu,ks_omega2,cov_mu,cov_omega2\n";
  for (const auto& s : report.summary)
    os << s.n << ',' << format_double(s.med_err) << ','
       << format_double(s.p90_err) << ',' << format_double(s.ks_mu) << ','
       << format_double(s.ks_omega2) << ',' << format_double(s.cov_mu) << ','
       << format_double(s.cov_omega2) << '\n';
}

inline std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + '"';
}

inline void write_failures_csv(std::ostream& os, const ExperimentReport& report) {
  os << "rep,n,error\n";
  for (const auto& f : report.failures)
    os << f.rep << ',' << f.n << ',' << csv_quote(f.message) << '\n';
}

/// Averaged-limit table; the final row (n = limit) holds the values at the
/// limit design point.
inline void write_limits_csv(std::ostream& os, const LimitTable& table) {
  os << "n,kl_avg,kl_se,kl_gap,kl_gap_se,kl_step_se,"
        "info_mumu,info_mumu_se,info_muomega2,info_muomega2_se,"
        "info_omega2omega2,info_omega2omega2_se,"
        "gap_mumu,gap_mumu_se,gap_omega2omega2,gap_omega2omega2_se,"
        "step_mumu_se,step_omega2omega2_se\n";
  auto f = format_double;
  for (const auto& r : table.rows)
    os << r.n << ',' << f(r.kl_avg) << ',' << f(r.kl_se) << ',' << f(r.kl_gap)
       << ',' << f(r.kl_gap_se) << ',' << f(r.kl_step_se) << ','
       << f(r.info_avg(0, 0)) << ',' << f(r.info_se(0, 0)) << ','
       << f(r.info_avg(0, 1)) << ',' << f(r.info_se(0, 1)) << ','
       << f(r.info_avg(1, 1)) << ',' << f(r.info_se(1, 1)) << ','
       << f(r.info_gap(0, 0)) << ',' << f(r.info_gap_se(0, 0)) << ','
       << f(r.info_gap(1, 1)) << ',' << f(r.info_gap_se(1, 1)) << ','
       << f(r.info_step_se(0, 0)) << ',' << f(r.info_step_se(1, 1)) << '\n';
  os << "limit," << f(table.kl_limit) << ',' << f(table.kl_limit_se)
     << ",0,0,0," << f(table.info_limit(0, 0)) << ','
     << f(table.info_limit_se(0, 0)) << ',' << f(table.info_limit(0, 1)) << ','
     << f(table.info_limit_se(0, 1)) << ',' << f(table.info_limit(1, 1)) << ','
     << f(table.info_limit_se(1, 1)) << ",0,0,0,0,0,0\n";
}

inline void write_probe_csv(std::ostream& os, const ProbeTable& table,
                            const ProbeConfig& cfg) {
  os << "m,power,x,T,estimate,mc_se,gap,gap_se,step,step_se\n";
  for (const auto& r : table.rows)
    os << r.m << ',' << r.power << ',' << format_double(r.x) << ','
       << format_double(r.T) << ',' << format_double(r.estimate) << ','
       << format_double(r.mc_se) << ',' << format_double(r.gap) << ','
       << format_double(r.gap_se) << ',' << format_double(r.step) << ','
       << format_double(r.step_se) << '\n';
  for (std::size_t i = 0; i < table.powers.size(); ++i)
    os << "limit," << table.powers[i] << ',' << format_double(cfg.x_tilde) << ','
       << format_double(cfg.T_tilde) << ','
       << format_double(table.limit_estimate[i]) << ','
       << format_double(table.limit_se[i]) << ",0,0,0,0\n";
}

// ---------------------------------------------------------------------------
// Ingestion

/// Reads `subject,k,t,x` rows. Each subject's rows must be contiguous with
/// k = 0, 1, 2, ..., t starting at 0 and strictly increasing, and at least
/// two points. Errors name the file line (header is line 1).
inline std::vector<Path> read_paths_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw IngestError("empty path file", 0);
  ++lineno;
  if (trim(line) != "subject,k,t,x")
    throw IngestError("expected header 'subject,k,t,x'", lineno);

  std::vector<Path> paths;
  std::map<std::uint64_t, bool> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    if (fields.size() != 4)
      throw IngestError("expected 4 fields, got " + std::to_string(fields.size()),
                        lineno);
    std::uint64_t subject = 0, k = 0;
    double t = 0.0, x = 0.0;
    if (!parse_uint(trim(fields[0]), subject))
      throw IngestError("bad subject id '" + std::string(fields[0]) + "'", lineno);
    const std::string where =
        "subject " + std::to_string(subject) + ", row " + std::to_string(lineno);
    if (!parse_uint(trim(fields[1]), k))
      throw IngestError(where + ": bad step index '" + std::string(fields[1]) + "'",
                        lineno);
    if (!parse_double(trim(fields[2]), t) || !std::isfinite(t))
      throw IngestError(where + ": bad time '" + std::string(fields[2]) + "'", lineno);
    if (!parse_double(trim(fields[3]), x) || !std::isfinite(x))
      throw IngestError(where + ": bad value '" + std::string(fields[3]) + "'", lineno);

    if (paths.empty() || paths.back().subject_index != subject) {
      if (seen.count(subject))
        throw IngestError(where + ": rows of this subject are not contiguous", lineno);
      if (!paths.empty() && paths.back().times.size() < 2)
        throw IngestError("subject " + std::to_string(paths.back().subject_index) +
                              " has fewer than two points",
                          lineno);
      seen[subject] = true;
      Path p;
      p.subject_index = subject;
      p.x0 = x;
      paths.push_back(std::move(p));
    }
    Path& p = paths.back();
    if (k != p.times.size())
      throw IngestError(where + ": expected k = " + std::to_string(p.times.size()),
                        lineno);
    if (k == 0 && t != 0.0)
      throw IngestError(where + ": time grid must start at t = 0", lineno);
    if (k > 0 && !(t > p.times.back()))
      throw IngestError(where + ": time " + format_double(t) +
                            " is not after previous time " +
                            format_double(p.times.back()),
                        lineno);
    p.times.push_back(t);
    p.values.push_back(x);
  }
  if (paths.empty()) throw IngestError("path file has no rows", lineno);
  if (paths.back().times.size() < 2)
    throw IngestError("subject " + std::to_string(paths.back().subject_index) +
                          " has fewer than two points",
                      lineno);
  for (auto& p : paths) p.dt = p.times[1] - p.times[0];
  return paths;
}

}  // namespace sde_remle
