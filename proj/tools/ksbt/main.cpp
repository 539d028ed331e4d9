#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ksbt/config.hpp"
#include "ksbt/errors.hpp"
#include "ksbt/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ksbt: binary-ternary Boltzmann near-vacuum solver and certificate suite"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  ksbt::RunOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "key = value configuration file")->required();
    sub->add_option("--seed", seed, "override the RNG seed");
    sub->add_option("--workers", workers, "override the worker count")->check(CLI::PositiveNumber);
    sub->add_flag("--override-smallness", opt.override_smallness,
                  "attempt the solve even above the smallness threshold");
  };
  add_common(app.add_subcommand("constants", "print the well-posedness constants as JSON"));
  add_common(app.add_subcommand("verify", "run the certificate suite; writes certificates.csv"));
  auto* kernels = app.add_subcommand("kernels", "write random collision frames to frames.csv");
  add_common(kernels);
  kernels->add_option("--frames", opt.kernel_frames, "frames per collision type")->check(CLI::PositiveNumber);
  auto* solve = app.add_subcommand("solve", "run the monotone iteration; writes trace, summary and checkpoints");
  add_common(solve);
  solve->add_flag("--resume", opt.resume, "continue from the newest checkpoint in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ksbt::exit_config;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    ksbt::RunConfig cfg = ksbt::parse_config(config);
    ksbt::apply_overrides(cfg, sub->count("--seed") ? &seed : nullptr, sub->count("--workers") ? &workers : nullptr);
    return ksbt::run_command(sub->get_name(), cfg, opt, std::cout);
  } catch (const ksbt::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return ksbt::exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
