#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sde_remle/commands.hpp"

namespace {

sde_remle::RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sde_remle::ConfigError("cannot read config '" + path + "'", 0);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return sde_remle::parse_config(text.str());
  } catch (const sde_remle::ConfigError& e) {
    throw sde_remle::ConfigError(path + ": " + e.what(), 0);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-likelihood MLE for mixed-effects SDEs"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file")->required();
    sub->add_option("--seed", seed, "master seed (overrides config and SDE_REMLE_SEED)");
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "simulate an ensemble of paths");
  common(simulate);
  auto* fit = app.add_subcommand("fit", "fit the MLE to a paths.csv file");
  common(fit);
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments");
  std::string kind;
  experiment->add_option("kind", kind, "consistency|normality|noniid|continuity")
      ->required()
      ->check(CLI::IsMember({"consistency", "normality", "noniid", "continuity"}));
  common(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  return sde_remle::run_guarded([&] {
    const auto cfg = load_config(config_path);
    sde_remle::CommandContext ctx;
    ctx.seed = seed;
    ctx.out_dir = out;
    ctx.threads = threads;
    if (simulate->parsed()) return sde_remle::cmd_simulate(cfg, ctx);
    if (fit->parsed()) return sde_remle::cmd_fit(cfg, ctx);
    return sde_remle::cmd_experiment(kind, cfg, ctx);
  });
}
