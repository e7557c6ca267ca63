#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bdlat/configuration.hpp"
#include "bdlat/kernel.hpp"

namespace bdlat {

/// A rate model bound to one window, evaluated on dense occupancy vectors
/// indexed like window().sites(). Engines hold one of these per trajectory.
class SiteRates {
 public:
  virtual ~SiteRates() = default;

  virtual double birth(std::size_t i, std::span<const int> occ) const = 0;
  virtual double death(std::size_t i, std::span<const int> occ) const = 0;

  /// birth[j], death[j] and total[j] = birth[j] + death[j] for every j in
  /// `sites` (arrays indexed like the window). Returns false if some rate is
  /// negative, NaN or infinite, or a death rate is positive at an empty site.
  virtual bool evaluate(std::span<const std::size_t> sites, std::span<const int> occ, double* birth, double* death,
                        double* total) const {
    return evaluate_with(*this, sites, occ, birth, death, total);
  }

  const Window& window() const { return *window_; }
  const WindowPtr& window_ptr() const { return window_; }

  /// Sites whose rates can change when occ[i] changes, i.e. every j within
  /// the interaction radius of i (including i). This is the incremental
  /// update set after an event at i.
  std::span<const std::size_t> dependents(std::size_t i) const {
    return {dependents_.data() + dep_begin_[i], dep_begin_[i + 1] - dep_begin_[i]};
  }

 protected:
  SiteRates(WindowPtr window, int radius);

  template <class R>
  static bool evaluate_with(const R& r, std::span<const std::size_t> sites, std::span<const int> occ, double* birth,
                            double* death, double* total) {
    bool ok = true;
    for (std::size_t j : sites) {
      double b, d;
      if constexpr (std::is_same_v<R, SiteRates>) {
        b = r.birth(j, occ);
        d = r.death(j, occ);
      } else {
        b = r.R::birth(j, occ);
        d = r.R::death(j, occ);
      }
      birth[j] = b;
      death[j] = d;
      total[j] = b + d;
      ok &= b >= 0.0 && d >= 0.0 && b + d <= 1.7976931348623157e308 && (occ[j] > 0 || d == 0.0);
    }
    return ok;
  }

 private:
  WindowPtr window_;
  std::vector<std::size_t> dep_begin_;
  std::vector<std::size_t> dependents_;
};

/// Devirtualized batch evaluation for final rate classes.
template <class Derived>
class BatchedRates : public SiteRates {
 public:
  bool evaluate(std::span<const std::size_t> sites, std::span<const int> occ, double* birth, double* death,
                double* total) const final {
    return evaluate_with(static_cast<const Derived&>(*this), sites, occ, birth, death, total);
  }

 protected:
  using SiteRates::SiteRates;
};

/// Kernel sums sum_y a(x - y) occ(y) over a window, precomputed as sparse rows.
class Stencil {
 public:
  Stencil() = default;
  Stencil(const Window& window, const Kernel& kernel);

  double apply(std::size_t i, std::span<const int> occ) const {
    double s = 0.0;
    for (std::size_t k = begin_[i]; k < begin_[i + 1]; ++k) s += weight_[k] * occ[index_[k]];
    return s;
  }
  bool empty() const { return index_.empty(); }

 private:
  std::vector<std::size_t> begin_;
  std::vector<std::size_t> index_;
  std::vector<double> weight_;
};

/// Birth rate b(x, eta) and death rate d(x, eta), local in eta.
class RateModel {
 public:
  virtual ~RateModel() = default;

  virtual std::string tag() const = 0;
  /// Rates at x depend on eta only through sites within this l1 radius.
  virtual int interaction_radius() const = 0;
  virtual std::unique_ptr<SiteRates> bind(WindowPtr window) const = 0;

  /// Largest occupancy reachable from initial states the model is meant for
  /// (1 for the contact process, the cap for capped models).
  virtual std::optional<int> occupancy_bound() const { return std::nullopt; }

  /// A kernel a with b(x,xi) - b(x,eta) <= sum_y a(x-y)|xi(y)-eta(y)| and
  /// d(x,xi) - d(x,eta) >= -sum_y a(x-y)|xi(y)-eta(y)| whenever xi(x) >= eta(x),
  /// valid for configurations with occupancies <= occupancy_limit.
  virtual std::optional<Kernel> dominating_kernel(int dim, int occupancy_limit) const;

  /// sup_{alpha <= eta} b(x, alpha) in closed form, when the model knows it.
  virtual std::shared_ptr<const RateModel> closed_form_envelope() const { return nullptr; }

  double birth(const Site& x, const Configuration& eta) const;
  double death(const Site& x, const Configuration& eta) const;
};

using ModelPtr = std::shared_ptr<const RateModel>;

struct BPDLParams {
  double b0 = 0.0;   // immigration
  double m = 0.0;    // intrinsic mortality
  Kernel a_plus;     // dispersal
  Kernel a_minus;    // competition
};

enum class AggregationBirth { Constant, BPDL };
enum class AggregationDeath { Exponential, Reciprocal };

struct AggregationParams {
  AggregationBirth birth_mode = AggregationBirth::Constant;
  AggregationDeath death_form = AggregationDeath::Exponential;
  double c = 1.0;
  Kernel phi;
  // BPDL-style birth only
  double b0 = 0.0;
  Kernel a_plus;
};

/// Death rate function g of the branching/local-death model.
struct DeathCurve {
  std::string name;
  std::function<double(int)> g;

  static DeathCurve square() { return {"square", [](int n) { return static_cast<double>(n) * n; }}; }
  static DeathCurve linear() { return {"linear", [](int n) { return static_cast<double>(n); }}; }
};

struct BranchLocalParams {
  double lambda = 1.0;
  DeathCurve g = DeathCurve::square();
};

/// b = b0 + sum_y a+(x-y) eta(y),  d = eta(x) (m + sum_y a-(x-y) eta(y))
ModelPtr bpdl_rates(const BPDLParams& p);

/// b = c or BPDL-style; d = I{eta(x)>0} e^{-c S} or I{eta(x)>0} / (1 + c S),
/// S = sum_y phi(x-y) eta(y).
ModelPtr aggregation_rates(const AggregationParams& p);

/// b = I{eta(x)=0} lambda sum_{|y-x|<=1} eta(y),  d = I{eta(x)>0}
ModelPtr contact_rates(double lambda);

/// b = lambda sum_{|y-x|<=1} eta(y),  d = g(eta(x))
ModelPtr branch_local_rates(const BranchLocalParams& p);

/// b = d = 0
ModelPtr frozen_rates();

/// Births at sites holding `cap` particles are suppressed.
ModelPtr capped(ModelPtr model, int cap);

using RateFunction = std::function<double(const Site&, const Configuration&)>;

/// Arbitrary local rates. Slow: every evaluation rebuilds a Configuration.
ModelPtr custom_rates(std::string tag, int interaction_radius, RateFunction birth, RateFunction death,
                      std::optional<Kernel> dominating = std::nullopt,
                      std::optional<int> occupancy_bound = std::nullopt);

/// Pure-birth majorant: birth = sup_{alpha <= eta} b(x, alpha), death = 0.
/// Uses the model's closed form when it has one; otherwise brute-forces the
/// supremum over alpha <= eta on the interaction neighbourhood, refusing
/// (ConfigError) when that neighbourhood holds more than probe_cap candidates.
ModelPtr pure_birth_envelope(ModelPtr model, std::size_t probe_cap = 4096);

/// Throws ConfigError unless g(0)=0, g(1)=1, g non-decreasing and g(n) >= n
/// (checked for n <= 1000).
void validate_death_curve(const DeathCurve& g);

}  // namespace bdlat
