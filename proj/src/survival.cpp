#include "bdlat/survival.hpp"

#include <algorithm>
#include <cmath>

#include "bdlat/parallel.hpp"
#include "bdlat/stats.hpp"

namespace bdlat {

namespace {

SurvivalEstimate summarize(double lambda, const SurvivalSetup& setup, std::span<const char> alive) {
  SurvivalEstimate e;
  e.lambda = lambda;
  e.horizon = setup.horizon;
  e.window_radius = setup.window_radius;
  e.replicates = alive.size();
  e.survivors = static_cast<std::size_t>(std::count(alive.begin(), alive.end(), char{1}));
  e.p_hat = e.replicates ? static_cast<double>(e.survivors) / static_cast<double>(e.replicates) : 0.0;
  e.ci95 = wilson_interval(e.survivors, e.replicates);
  return e;
}

}  // namespace

namespace {

// Each accepted event refreshes the rates of every site it can affect, so the
// current rates themselves bound the rates until the next refresh.
bool alive_at_horizon(const ModelPtr& model, const WindowPtr& window, const std::vector<int>& initial,
                      const SurvivalSetup& setup, std::uint64_t seed, std::uint64_t replicate) {
  ThinningEngine engine(model, model, window, initial, seed, replicate);
  long population = 0;
  for (int n : initial) population += n;
  std::uint64_t events = 0;
  while (population > 0) {
    const auto next = engine.advance(setup.horizon);
    if (!next) break;
    if (++events > setup.max_events)
      throw ExplosionError("explosion guard: more than " + std::to_string(setup.max_events) + " events", *next,
                           events);
    population += engine.fire().delta;
  }
  return population > 0;
}

}  // namespace

std::vector<char> survival_indicators(double lambda, const SurvivalSetup& setup, std::uint64_t seed,
                                      std::uint64_t first, std::size_t count) {
  if (!(lambda >= 0.0)) throw ConfigError("survival: lambda must be >= 0");
  if (!(setup.horizon >= 0.0)) throw ConfigError("survival: horizon must be >= 0");
  validate_death_curve(setup.g);
  const ModelPtr model = branch_local_rates({lambda, setup.g});
  std::vector<ModelPtr> screens;
  for (int cap : setup.screen_caps) {
    if (cap < 1) throw ConfigError("survival: screening caps must be >= 1");
    screens.push_back(capped(model, cap));
  }
  const WindowPtr window = Window::ball(setup.dim, setup.window_radius);
  const std::vector<int> initial = Configuration::delta(window, Site::origin(setup.dim)).dense();

  return map_replicates(count, setup.workers, [&](std::size_t k) -> char {
    const std::uint64_t rep = first + k;
    for (const auto& screen : screens)
      if (alive_at_horizon(screen, window, initial, setup, seed, rep)) return 1;
    return alive_at_horizon(model, window, initial, setup, seed, rep) ? 1 : 0;
  });
}

SurvivalEstimate estimate_survival(double lambda, const SurvivalSetup& setup, std::size_t replicates,
                                   std::uint64_t seed) {
  const auto alive = survival_indicators(lambda, setup, seed, 0, replicates);
  return summarize(lambda, setup, alive);
}

BracketStep decide_side(double lambda, const SurvivalSetup& setup, const BracketOptions& options,
                        std::uint64_t seed) {
  if (options.replicates == 0) throw ConfigError("bracket: replicates must be positive");
  BracketStep step;
  if (lambda == 0.0) {
    // No births: the single particle always dies.
    step.estimate = summarize(lambda, setup, {});
    step.side = Side::Extinct;
    return step;
  }
  std::vector<char> alive;
  std::size_t target = options.replicates;
  while (true) {
    // Doubling reuses the replicates already run.
    const auto more = survival_indicators(lambda, setup, seed, alive.size(), target - alive.size());
    alive.insert(alive.end(), more.begin(), more.end());
    step.estimate = summarize(lambda, setup, alive);
    const auto [lo, hi] = step.estimate.ci95;
    if (lo > options.threshold) {
      step.side = Side::Survives;
      return step;
    }
    if (hi < options.threshold) {
      step.side = Side::Extinct;
      return step;
    }
    if (target >= options.max_replicates) break;
    target = std::min(2 * target, std::max(options.max_replicates, options.replicates));
  }
  step.resolved = false;
  step.side = step.estimate.p_hat > options.threshold ? Side::Survives : Side::Extinct;
  return step;
}

BracketResult bracket_lambda_c(const SurvivalSetup& setup, const BracketOptions& options, std::uint64_t seed) {
  if (!(options.tol > 0.0)) throw ConfigError("bracket: tol must be > 0");
  if (!(options.lo >= 0.0 && options.lo < options.hi)) throw ConfigError("bracket: need 0 <= lo < hi");
  BracketResult out;
  out.lo = options.lo;
  out.hi = options.hi;
  while (out.hi - out.lo > options.tol) {
    const double mid = 0.5 * (out.lo + out.hi);
    BracketStep step = decide_side(mid, setup, options, seed);
    if (!step.resolved) ++out.unresolved;
    (step.side == Side::Survives ? out.hi : out.lo) = mid;
    out.steps.push_back(std::move(step));
  }
  return out;
}

}  // namespace bdlat
