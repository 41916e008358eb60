// gibbslab: a numerical laboratory for N-particle Gibbs ensembles with
// finite-order mean-field interactions on compact spaces.
//
// Subcommands: sample, minimize, verify, scan-beta.
// Exit codes: 0 = ran (reports may contain failures-as-data),
//             1 = configuration error, 2 = stability refusal.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "gibbslab/cli.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--seed", flags.seed, "master seed (overrides the config)")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--workers", flags.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", flags.out_override, "output directory override");
}

gibbslab::ExperimentConfig load(const CommonFlags& flags) {
  auto cfg = gibbslab::load_config(flags.config_path);
  if (flags.seed_set) cfg.run_options.seed = flags.seed;
  if (!flags.out_override.empty()) cfg.output_dir = flags.out_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gibbslab: Gibbs ensembles for mean-field interactions on "
               "compact spaces"};
  app.require_subcommand(1);

  CommonFlags sample_flags, minimize_flags, verify_flags, scan_flags;
  auto* sample = app.add_subcommand("sample", "run Metropolis chains");
  add_common(sample, sample_flags);
  auto* minimize =
      app.add_subcommand("minimize", "minimize the free-energy functional");
  add_common(minimize, minimize_flags);
  auto* verify = app.add_subcommand("verify", "run a named verification suite");
  add_common(verify, verify_flags);
  auto* scan =
      app.add_subcommand("scan-beta", "thermodynamic integration over a beta ladder");
  add_common(scan, scan_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sample->parsed()) {
      gibbslab::cmd_sample(load(sample_flags), sample_flags.workers);
    } else if (minimize->parsed()) {
      gibbslab::cmd_minimize(load(minimize_flags), minimize_flags.workers);
    } else if (verify->parsed()) {
      gibbslab::cmd_verify(load(verify_flags), verify_flags.workers);
    } else if (scan->parsed()) {
      gibbslab::cmd_scan_beta(load(scan_flags), scan_flags.workers);
    }
  } catch (const gibbslab::StabilityError& e) {
    std::fprintf(stderr, "stability refusal: %s\n", e.what());
    return 2;
  } catch (const gibbslab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
