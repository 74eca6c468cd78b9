#pragma once

// Subcommands behind the sde_remle tool. Each takes a parsed RunConfig plus
// command-line overrides, writes CSV files into the output directory and
// prints a one-line summary.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sde_remle/asymptotics.hpp"
#include "sde_remle/config.hpp"
#include "sde_remle/csv.hpp"
#include "sde_remle/error.hpp"
#include "sde_remle/mle.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/path_simulator.hpp"
#include "sde_remle/suff_stats.hpp"

namespace sde_remle {

/// Command-line overrides. `threads` changes speed only, never results.
struct CommandContext {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  unsigned threads = 1;
  std::ostream* log = &std::cout;
};

namespace detail {

inline std::filesystem::path output_dir(const RunConfig& cfg,
                                        const CommandContext& ctx) {
  std::filesystem::path dir;
  if (ctx.out_dir)
    dir = *ctx.out_dir;
  else if (cfg.has("output_dir"))
    dir = cfg.text("output_dir");
  else
    throw MissingKey("missing required key 'output_dir' (or pass --out)", 0);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& file,
                       const std::function<void(std::ostream&)>& body) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  body(os);
  if (!os) throw Error("failed writing " + file.string());
}

/// Canonical config with the resolved seed and without the output location,
/// so identical runs into different directories produce identical files.
inline void write_config_echo(const std::filesystem::path& dir, RunConfig cfg,
                              std::uint64_t seed) {
  cfg.set("seed", std::to_string(seed));
  std::string text = cfg.canonical();
  std::string filtered;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);)
    if (line.rfind("output_dir ", 0) != 0) filtered += line + '\n';
  write_file(dir / "config.conf", [&](std::ostream& os) { os << filtered; });
}

inline Theta theta0_of(const RunConfig& cfg) {
  cfg.require({"mu0", "omega2_0"});
  const Theta t{cfg.real("mu0"), cfg.real("omega2_0")};
  if (t.omega2 < 0.0)
    throw ParseError("omega2_0 must be >= 0", cfg.line_of("omega2_0"));
  return t;
}

inline ParamSpace space_of(const RunConfig& cfg) {
  ParamSpace s;
  s.mu_lo = cfg.real_or("mu_lo", s.mu_lo);
  s.mu_hi = cfg.real_or("mu_hi", s.mu_hi);
  s.omega2_lo = cfg.real_or("omega2_lo", s.omega2_lo);
  s.omega2_hi = cfg.real_or("omega2_hi", s.omega2_hi);
  s.validate();
  return s;
}

inline DesignKind design_kind_of(const RunConfig& cfg) {
  const std::string kind = cfg.text_or("design", "iid");
  if (kind == "iid") return DesignKind::iid;
  if (kind == "converging") return DesignKind::converging;
  throw ParseError("design must be 'iid' or 'converging', got '" + kind + "'",
                   cfg.line_of("design"));
}

inline DesignSequence sequence_of(const RunConfig& cfg) {
  DesignSequence seq;
  seq.x_inf = cfg.real_or("x_inf", seq.x_inf);
  seq.T_inf = cfg.real_or("T_inf", seq.T_inf);
  seq.a = cfg.real_or("design_a", seq.a);
  seq.b = cfg.real_or("design_b", seq.b);
  return seq;
}

inline std::vector<std::size_t> sizes(const std::vector<std::uint64_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace detail

inline ExperimentConfig experiment_config(const RunConfig& cfg,
                                          const CommandContext& ctx) {
  cfg.require({"dt", "replicates"});
  ExperimentConfig e;
  e.model = cfg.text_or("model", e.model);
  (void)builtin_model(e.model);
  e.theta0 = detail::theta0_of(cfg);
  e.space = detail::space_of(cfg);
  e.design = detail::design_kind_of(cfg);
  e.x0 = cfg.real_or("x0", e.x0);
  e.T = cfg.real_or("T", e.T);
  e.sequence = detail::sequence_of(cfg);
  e.dt = cfg.real("dt");
  e.seed = resolve_seed(cfg, ctx.seed);
  e.replicates = cfg.count("replicates");
  e.n_schedule = detail::sizes(
      cfg.has("n_schedule") ? cfg.counts("n_schedule")
                            : std::vector<std::uint64_t>{cfg.count_or("n", 0)});
  e.info_replicates = cfg.count_or("info_replicates", e.info_replicates);
  e.audit_grid = cfg.count_or("audit_grid", e.audit_grid);
  e.threads = ctx.threads;
  return e;
}

inline ProbeConfig probe_config(const RunConfig& cfg, const CommandContext& ctx) {
  cfg.require({"dt", "replicates", "psi", "xi"});
  ProbeConfig p;
  p.model = cfg.text_or("model", p.model);
  (void)builtin_model(p.model);
  p.theta0 = detail::theta0_of(cfg);
  const auto seq = detail::sequence_of(cfg);
  p.x_tilde = seq.x_inf;
  p.T_tilde = seq.T_inf;
  p.a = seq.a;
  p.b = seq.b;
  p.psi = cfg.real("psi");
  p.xi = cfg.real("xi");
  p.m_schedule = detail::sizes(cfg.counts_or("m_schedule", {1, 2, 4, 8, 16}));
  p.powers.clear();
  for (auto k : cfg.counts_or("powers", {1, 2})) p.powers.push_back(static_cast<int>(k));
  p.dt = cfg.real("dt");
  p.replicates = cfg.count("replicates");
  p.seed = resolve_seed(cfg, ctx.seed);
  p.threads = ctx.threads;
  return p;
}

/// Simulates one ensemble and writes paths.csv and stats.csv.
inline int cmd_simulate(const RunConfig& cfg, const CommandContext& ctx) {
  cfg.require({"n", "dt"});
  const ModelSpec model = builtin_model(cfg.text_or("model", "unit"));
  const Theta theta0 = detail::theta0_of(cfg);
  const std::uint64_t seed = resolve_seed(cfg, ctx.seed);
  const std::size_t n = cfg.count("n");
  const double dt = cfg.real("dt");
  Design design;
  if (detail::design_kind_of(cfg) == DesignKind::iid) {
    design = Design::iid(n, cfg.real_or("x0", 1.0), cfg.real_or("T", 1.0), dt, seed);
  } else {
    const auto seq = detail::sequence_of(cfg);
    design = Design::converging(n, seq.x_inf, seq.T_inf, seq.a, seq.b, dt, seed);
  }
  const auto dir = detail::output_dir(cfg, ctx);
  const auto paths = simulate_ensemble(model, theta0, design, 0, ctx.threads);
  std::vector<SuffStats> stats;
  for (const auto& p : paths) stats.push_back(compute_suff_stats(p, model));

  detail::write_file(dir / "paths.csv", [&](std::ostream& os) { write_paths_csv(os, paths); });
  detail::write_file(dir / "stats.csv", [&](std::ostream& os) { write_stats_csv(os, stats); });
  detail::write_config_echo(dir, cfg, seed);
  *ctx.log << "simulate: " << n << " subjects of model " << model.name
           << " (seed " << seed << ") -> " << dir.string() << '\n';
  return 0;
}

/// Fits the MLE to the paths in `input` (a paths.csv) and writes stats.csv
/// and fit.csv.
inline int cmd_fit(const RunConfig& cfg, const CommandContext& ctx) {
  cfg.require({"input"});
  const ModelSpec model = builtin_model(cfg.text_or("model", "unit"));
  const ParamSpace space = detail::space_of(cfg);
  std::ifstream in(cfg.text("input"), std::ios::binary);
  if (!in) throw IngestError("cannot open input '" + cfg.text("input") + "'", 0);
  const auto paths = read_paths_csv(in);
  std::vector<SuffStats> stats;
  for (const auto& p : paths) stats.push_back(compute_suff_stats(p, model));
  FitOptions opts;
  opts.audit_grid = cfg.count_or("audit_grid", opts.audit_grid);
  const MleFit fit = fit_mle(stats, space, opts);

  const auto dir = detail::output_dir(cfg, ctx);
  detail::write_file(dir / "stats.csv", [&](std::ostream& os) { write_stats_csv(os, stats); });
  detail::write_file(dir / "fit.csv", [&](std::ostream& os) { write_fit_csv(os, fit); });
  *ctx.log << "fit: n=" << fit.n << " mu_hat=" << format_double(fit.theta_hat.mu)
           << " omega2_hat=" << format_double(fit.theta_hat.omega2)
           << " loglik=" << format_double(fit.loglik)
           << " boundary=" << fit.boundary.to_string() << '\n';
  return 0;
}

/// `kind` is one of consistency, normality, noniid, continuity.
inline int cmd_experiment(std::string_view kind, const RunConfig& cfg,
                          const CommandContext& ctx) {
  if (kind == "continuity") {
    const ProbeConfig probe = probe_config(cfg, ctx);
    const ProbeTable table = run_moment_continuity_probe(probe);
    const auto dir = detail::output_dir(cfg, ctx);
    detail::write_file(dir / "continuity.csv",
                       [&](std::ostream& os) { write_probe_csv(os, table, probe); });
    detail::write_config_echo(dir, cfg, probe.seed);
    *ctx.log << "experiment continuity: " << table.rows.size() << " rows, "
             << table.failures << " failed replicates -> " << dir.string() << '\n';
    return 0;
  }

  ExperimentConfig ecfg = experiment_config(cfg, ctx);
  std::optional<LimitTable> limits;
  ExperimentReport report;
  if (kind == "consistency") {
    cfg.require({"n_schedule"});
    report = run_consistency_experiment(ecfg);
  } else if (kind == "normality") {
    cfg.require({"n"});
    report = run_normality_experiment(ecfg);
  } else if (kind == "noniid") {
    cfg.require({"n", "mu_alt", "omega2_alt"});
    if (cfg.has("design") && ecfg.design != DesignKind::converging)
      throw ParseError("noniid experiments need design = converging",
                       cfg.line_of("design"));
    ecfg.design = DesignKind::converging;
    const Theta alt{cfg.real("mu_alt"), cfg.real("omega2_alt")};
    const auto schedule =
        detail::sizes(cfg.counts_or("limit_schedule", {8, 16, 32, 64, 128, 256}));
    limits = averaged_limits(builtin_model(ecfg.model), ecfg.sequence, ecfg.theta0,
                             alt, ecfg.dt, ecfg.info_replicates, ecfg.seed,
                             schedule, ecfg.threads);
    report = run_normality_experiment(ecfg);
  } else {
    throw InvalidArgument("unknown experiment '" + std::string(kind) +
                          "' (expected consistency, normality, noniid or continuity)");
  }

  const auto dir = detail::output_dir(cfg, ctx);
  detail::write_file(dir / "replicates.csv",
                     [&](std::ostream& os) { write_replicates_csv(os, report); });
  detail::write_file(dir / "summary.csv",
                     [&](std::ostream& os) { write_summary_csv(os, report); });
  detail::write_file(dir / "failures.csv",
                     [&](std::ostream& os) { write_failures_csv(os, report); });
  if (limits)
    detail::write_file(dir / "limits.csv",
                       [&](std::ostream& os) { write_limits_csv(os, *limits); });
  detail::write_config_echo(dir, cfg, ecfg.seed);

  *ctx.log << "experiment " << kind << ": " << report.records.size()
           << " fits, " << report.failures.size() << " failures -> "
           << dir.string() << '\n';
  if (report.failed) {
    std::cerr << "experiment " << kind << " failed: more than 1% of replicates failed\n";
    return 2;
  }
  return 0;
}

/// Runs `body`, mapping errors to exit status: 1 for invalid input (config,
/// ingestion, arguments), 2 for runtime failures.
inline int run_guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace sde_remle
