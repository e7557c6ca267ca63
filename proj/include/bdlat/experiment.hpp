#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bdlat/engine.hpp"
#include "bdlat/rates.hpp"
#include "json.hpp"

namespace bdlat {

/// A parsed experiment file. Every key is present in `resolved`, with
/// defaults filled in; `resolved` is what the content hash and the manifest
/// describe. Worker count and output directory are left out of it because
/// they never change the results.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t replicates = 1000;
  double horizon = 1.0;
  Algorithm algorithm = Algorithm::Gillespie;
  std::uint64_t max_events = kDefaultMaxEvents;

  WindowPtr window;
  ModelPtr model;   // null when the experiment does not need one
  ModelPtr model2;  // defaults to model
  std::optional<BPDLParams> bpdl;  // set when [model] is a BPDL block
  std::optional<Configuration> initial;
  std::optional<Configuration> initial2;
  std::map<std::string, std::string> params;

  unsigned workers = 1;
  std::filesystem::path output_dir;

  nlohmann::json resolved;

  std::string config_hash() const;
};

inline const std::vector<std::string>& experiment_tags() {
  static const std::vector<std::string> tags = {"run",         "oracle-compare", "coupling",       "contraction",
                                                "martingale",  "drift",          "occupation",     "survival-sweep",
                                                "bracket",     "window-convergence"};
  return tags;
}

/// INI text: top-level keys, then [model], [model2], [kernel], [window],
/// [initial], [initial2] and [params] blocks. Unknown keys and blocks throw
/// ConfigError.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

/// "box:c:k", "point:c", "zero", or a JSON list [[[z...], a(z)], ...].
Kernel parse_kernel(const std::string& spec, int dim);
/// "x1,...,xd" separated by ';'.
std::vector<Site> parse_sites(const std::string& text, int dim);
/// "x1,...,xd:n" separated by ';'.
Configuration parse_counts(const std::string& text, const WindowPtr& window);
std::vector<double> parse_reals(const std::string& text);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int config = 2;
inline constexpr int assertion = 3;
inline constexpr int explosion = 4;
}  // namespace exit_code

struct ExperimentOutcome {
  int exit_code = exit_code::ok;
  std::vector<std::string> summary;      // human-readable lines
  std::vector<std::filesystem::path> files;  // relative to output_dir
};

/// Runs the experiment, writes its outputs and manifest.json into
/// config.output_dir. Exceptions propagate; see run_cli for their codes.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Loads, applies overrides, runs, prints the summary to `out`; errors
/// become one line "error kind=<kind> message=<json string>" on `err` and an
/// exit code.
int run_cli(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
            std::optional<unsigned> workers, std::optional<std::filesystem::path> output_dir, std::ostream& out,
            std::ostream& err);

/// BDLAT_OUTPUT_DIR, or "bdlat-out" when unset.
std::filesystem::path default_output_dir();

}  // namespace bdlat
