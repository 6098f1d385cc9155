#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lyaplab/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  int threads = 1;
  int grid = 0;  // 0: keep config value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("config", opts.config_path, "JSON config file")->required();
  cmd->add_option("--out", opts.out, "output path (overrides config)");
  cmd->add_option("--threads", opts.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--grid", opts.grid, "projective grid size (overrides config)")
      ->check(CLI::PositiveNumber);
}

lyaplab::ExperimentConfig load(const CommonOpts& opts) {
  lyaplab::ExperimentConfig cfg = lyaplab::load_config(opts.config_path);
  if (!opts.out.empty()) cfg.out = opts.out;
  if (opts.grid > 0) {
    if (opts.grid < 8)
      throw lyaplab::ValidationError("--grid: must be >= 8");
    cfg.grid = opts.grid;
  }
  return cfg;
}

void deliver(const std::string& text, const lyaplab::ExperimentConfig& cfg) {
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    lyaplab::emit(text, cfg.out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for extremal Lyapunov exponents of "
               "2x2 cocycles over Markov shifts"};
  app.require_subcommand(1);

  CommonOpts validate_o, lyapunov_o, stationary_o, expanding_o, sweep_o,
      energy_o;
  add_common(app.add_subcommand("validate", "check a config and echo it back"),
             validate_o);
  add_common(app.add_subcommand("lyapunov",
                                "Monte-Carlo and Furstenberg exponents"),
             lyapunov_o);
  add_common(app.add_subcommand("stationary",
                                "stationary measure vector and atom report"),
             stationary_o);
  add_common(app.add_subcommand("expanding",
                                "invariant points and expanding certificates"),
             expanding_o);
  add_common(app.add_subcommand("sweep", "continuity sweep over a family"),
             sweep_o);
  add_common(app.add_subcommand("energy-decay",
                                "coupling energy contraction trace"),
             energy_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) {
      const auto cfg = load(validate_o);
      deliver(lyaplab::config_echo(cfg).dump(2) + "\n", cfg);
    } else if (app.got_subcommand("lyapunov")) {
      const auto cfg = load(lyapunov_o);
      deliver(lyaplab::run_lyapunov(cfg).dump(2) + "\n", cfg);
    } else if (app.got_subcommand("stationary")) {
      const auto cfg = load(stationary_o);
      deliver(lyaplab::run_stationary(cfg).dump(2) + "\n", cfg);
    } else if (app.got_subcommand("expanding")) {
      const auto cfg = load(expanding_o);
      deliver(lyaplab::run_expanding(cfg).dump(2) + "\n", cfg);
    } else if (app.got_subcommand("sweep")) {
      const auto cfg = load(sweep_o);
      deliver(lyaplab::run_sweep(cfg, sweep_o.threads), cfg);
    } else if (app.got_subcommand("energy-decay")) {
      const auto cfg = load(energy_o);
      deliver(lyaplab::run_energy_decay(cfg), cfg);
    }
  } catch (const lyaplab::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const lyaplab::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const lyaplab::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  }
  return 0;
}
