#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bdlat/engine.hpp"
#include "bdlat/rates.hpp"

namespace bdlat {

/// Fraction of runs of the branching/local-death model, started from one
/// particle at the origin, that are still alive at the horizon.
struct SurvivalEstimate {
  double lambda = 0.0;
  double horizon = 0.0;
  int window_radius = 0;
  std::size_t replicates = 0;
  std::size_t survivors = 0;
  double p_hat = 0.0;
  std::pair<double, double> ci95{0.0, 1.0};  // Wilson
};

struct SurvivalSetup {
  DeathCurve g = DeathCurve::square();
  int dim = 1;
  int window_radius = 20;
  double horizon = 50.0;
  unsigned workers = 1;
  std::uint64_t max_events = 100'000'000;
  /// Occupancy caps of the screening runs (see survival_indicators).
  std::vector<int> screen_caps = {1, 2};
};

/// Survival indicators of replicates [first, first + count), from thinning
/// runs on the site noise of each replicate. Each run stops as soon as it
/// hits the empty configuration.
///
/// The capped model (births suppressed at `cap` particles) is dominated by
/// the full model on shared noise, so a capped run alive at the horizon
/// settles the replicate. Only replicates where every screening run dies are
/// simulated with the full model. The indicators are therefore exactly those
/// of full runs, whatever the screening caps.
std::vector<char> survival_indicators(double lambda, const SurvivalSetup& setup, std::uint64_t seed,
                                      std::uint64_t first, std::size_t count);

SurvivalEstimate estimate_survival(double lambda, const SurvivalSetup& setup, std::size_t replicates,
                                   std::uint64_t seed);

inline SurvivalEstimate estimate_survival(double lambda, const DeathCurve& g, int dim, int window_radius,
                                          double horizon, std::size_t replicates, std::uint64_t seed,
                                          unsigned workers = 1) {
  SurvivalSetup setup{g, dim, window_radius, horizon, workers};
  return estimate_survival(lambda, setup, replicates, seed);
}

struct BracketOptions {
  double lo = 0.0;
  double hi = 4.0;
  double tol = 0.25;
  double threshold = 0.02;
  std::size_t replicates = 500;       // at each bisection point, to start
  std::size_t max_replicates = 8000;  // doubling stops here
};

enum class Side { Extinct, Survives };

struct BracketStep {
  SurvivalEstimate estimate;
  Side side = Side::Extinct;
  /// The Wilson interval separated from the threshold. Otherwise the side
  /// was taken from p_hat after the replicate budget ran out.
  bool resolved = true;
};

struct BracketResult {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<BracketStep> steps;
  std::size_t unresolved = 0;
};

/// Guarded comparison of p_hat(lambda) with the threshold: replicates are
/// doubled until the 95% interval clears it or the budget is spent.
BracketStep decide_side(double lambda, const SurvivalSetup& setup, const BracketOptions& options, std::uint64_t seed);

/// Bisection for the (finite horizon, finite window) pseudo-critical value,
/// assuming options.lo is extinct and options.hi survives. Stops when
/// hi - lo <= tol.
BracketResult bracket_lambda_c(const SurvivalSetup& setup, const BracketOptions& options, std::uint64_t seed);

}  // namespace bdlat
