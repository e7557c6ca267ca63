// bdlat CONFIG [--seed N] [--workers K] [--output-dir DIR]

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "bdlat/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Lattice birth-and-death experiments"};
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> output;
  app.add_option("config", config, "experiment file (INI)")->required();
  app.add_option("--seed", seed, "override the seed in the config");
  app.add_option("--workers", workers, "replicate threads (0 = all cores); results do not depend on it");
  app.add_option("--output-dir", output, "output directory (default: config 'output', then $BDLAT_OUTPUT_DIR)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=config message=" << nlohmann::json(std::string(e.what())).dump() << "\n";
    return bdlat::exit_code::config;
  }
  std::optional<std::filesystem::path> dir;
  if (output) dir = *output;
  return bdlat::run_cli(config, seed, workers, dir, std::cout, std::cerr);
}
