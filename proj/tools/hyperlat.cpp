#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hyperlat/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lattice enumeration, Diophantine exponents and spectral checks for quaternion lattices"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config, out = "out", cache;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config, "JSON run configuration (defaults are used for missing keys)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Overrides every seed in the configuration");
  app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--cache-dir", cache, "Enumeration cache directory (default: <out>/cache)");

  const std::pair<const char*, const char*> subs[] = {
      {"enumerate", "Units in a product of balls, plus growth counts"},
      {"approx", "Single approximation search"},
      {"exponent", "Approximation exponent over random pairs"},
      {"volumes", "Ball volumes and the matching-volume schedule"},
      {"spherical", "Spherical functions and transform cross-checks"},
      {"decay", "Decay constants of the test-function transforms"},
      {"tracesim", "Trace scaling on a synthetic spectrum"},
      {"zaremba", "Integration-by-parts self-test"},
  };
  for (const auto& [name, help] : subs) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  hyperlat::RunOptions opt;
  if (!config.empty()) opt.config = config;
  opt.out = out;
  opt.seed = seed;
  opt.threads = threads;
  if (!cache.empty()) opt.cache_dir = cache;
  return hyperlat::run(app.get_subcommands().front()->get_name(), opt, std::cerr);
}
