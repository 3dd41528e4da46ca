#include <iostream>

#include "CLI11.hpp"
#include "padiclab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"p-adic analysis and stochastic flow experiments driven by a JSON config"};
  std::string config;
  padiclab::cli::RunOptions options;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  app.add_option("-c,--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--out", options.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", options.threads, "worker threads for ensembles")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  auto* tol_opt = app.add_option("--tolerance", tolerance, "override the acceptance tolerance")
                      ->check(CLI::PositiveNumber);
  std::string listing = "subcommands (config field \"subcommand\"):";
  for (const auto& s : padiclab::cli::subcommands()) listing += " " + s;
  app.footer(listing);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) options.seed = seed;
  if (*tol_opt) options.tolerance = tolerance;
  return padiclab::cli::run_file(config, options, std::cout, std::cerr);
}
