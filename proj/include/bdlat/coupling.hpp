#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdlat/engine.hpp"
#include "bdlat/kernel.hpp"
#include "json.hpp"

namespace bdlat {

struct TildeRates {
  double birth = 0.0;
  double death = 0.0;
};

/// Joint rates at x of the pair (xi, eta), xi driven by `m1` and eta by
/// `m2`: the rates of the larger process where the two differ at x, max of
/// the births and min of the deaths where they agree.
TildeRates tilde_rates(const Site& x, const Configuration& xi, const Configuration& eta, const RateModel& m1,
                       const RateModel& m2);
inline TildeRates tilde_rates(const Site& x, const Configuration& xi, const Configuration& eta,
                              const RateModel& model) {
  return tilde_rates(x, xi, eta, model, model);
}

/// Result of probing the comparison hypotheses on random ordered pairs.
struct HypothesisProbe {
  bool holds = true;
  std::size_t pairs = 0;
  std::size_t checks = 0;
  std::string counterexample;  // empty when holds
};

/// Samples `pairs` configurations xi1 <= xi2 on `window` and checks
///   (i)  b1(x, xi1) <= b2(x, xi2)
///   (ii) d1(x, xi1) >= d2(x, xi2) wherever xi1(x) = xi2(x)
/// at sites around a random centre. Occupancies respect each model's
/// occupancy_bound() and never exceed max_occupancy.
HypothesisProbe probe_comparison_hypotheses(const RateModel& lower, const RateModel& upper, const WindowPtr& window,
                                            std::size_t pairs, std::uint64_t seed, int max_occupancy = 6);

enum class CouplingMethod { JointGillespie, SharedThinning };

std::string to_string(CouplingMethod m);
CouplingMethod coupling_method_from_string(const std::string& tag);

struct JointEvent {
  double time = 0.0;
  std::uint32_t site = 0;
  std::int8_t delta = 0;
  Channel channel = Channel::Birth;
  bool first = false;   // the first process jumps
  bool second = false;  // the second process jumps
};

/// Gillespie simulation of a pair on shared noise. At each site and channel
/// the two rates r1, r2 are split into a joint part min(r1, r2), where both
/// processes jump, and a solo part |r1 - r2| for the larger one. This is the
/// law of two thinnings of the same Poisson noise.
class CoupledGillespie {
 public:
  CoupledGillespie(ModelPtr m1, ModelPtr m2, WindowPtr window, std::vector<int> initial1, std::vector<int> initial2,
                   std::uint64_t seed, std::uint64_t replicate);

  std::optional<double> advance(double horizon);
  JointEvent fire();

  double clock() const { return clock_; }
  std::span<const int> first() const { return occ1_; }
  std::span<const int> second() const { return occ2_; }
  const Window& window() const { return r1_->window(); }

 private:
  void refresh(std::span<const std::size_t> sites);
  std::span<const std::size_t> dependents(std::size_t i) const;

  ModelPtr m1_, m2_;
  std::unique_ptr<SiteRates> r1_, r2_;
  std::vector<int> occ1_, occ2_;
  std::vector<double> b1_, d1_, t1_, b2_, d2_, t2_, total_;
  std::vector<std::size_t> all_;
  std::vector<std::size_t> deps_;
  bool use_first_deps_ = true;
  SumTree tree_;
  NoiseStream stream_;
  double clock_ = 0.0;
  bool pending_ = false;
  double pending_time_ = 0.0;
  double pending_u_ = 0.0;
};

struct Violation {
  double time = 0.0;
  Site site;
  std::uint64_t replicate = 0;
  std::string kind;  // "domination" or "birth-inclusion"
};

/// {clean, first_violation: {t, x} | null, replicates}, plus counters.
struct DominationReport {
  bool clean = true;
  std::optional<Violation> first_violation;
  std::size_t replicates = 0;
  std::size_t domination_violations = 0;
  std::size_t inclusion_violations = 0;
  /// False when the hypothesis probe failed: the run is then diagnostic only.
  bool hypotheses_verified = true;

  void merge(const DominationReport& other);
};

nlohmann::json to_json(const DominationReport& r);

struct CoupledRun {
  Trajectory lower;
  Trajectory upper;
  DominationReport report;
};

struct CouplingOptions {
  CouplingMethod method = CouplingMethod::JointGillespie;
  std::uint64_t max_events = kDefaultMaxEvents;
  bool record_events = true;
};

/// One coupled pair on shared noise, lower = model1 from eta1, upper =
/// model2 from eta2. Checks lower <= upper after every event and that every
/// birth of the lower process is a birth of the upper one at the same time
/// and site. Hypotheses are not probed here (see coupling_experiment).
CoupledRun run_coupled(const ModelPtr& model1, const ModelPtr& model2, const Configuration& eta1,
                       const Configuration& eta2, double horizon, std::uint64_t seed, std::uint64_t replicate = 0,
                       const CouplingOptions& options = {});

/// Probes the hypotheses (10^4 pairs by default), then runs `replicates`
/// coupled pairs and merges their reports. A failed probe still runs, with
/// hypotheses_verified = false and clean = false.
DominationReport coupling_experiment(const ModelPtr& model1, const ModelPtr& model2, const Configuration& eta1,
                                     const Configuration& eta2, double horizon, std::uint64_t seed,
                                     std::size_t replicates, unsigned workers = 1, const CouplingOptions& options = {},
                                     std::size_t probe_pairs = 10'000);

struct ContractionRow {
  double t = 0.0;
  double lhs = 0.0;  // estimate of E sum_x w(x)|eta^A_t(x) - eta^B_t(x)|
  double std_error = 0.0;
  double bound = 0.0;  // sum_x w(x)|A(x) - B(x)| exp(4 c_wa t)
  bool ok = true;      // lhs <= bound + 3 SE
};

struct ContractionResult {
  std::vector<ContractionRow> rows;
  int max_occupancy = 0;  // largest occupancy seen in any coupled run
};

/// Weighted-l1 distance between solutions from A and B on shared noise
/// (joint-rate coupling) against the exponential bound with constant c_wa.
ContractionResult contraction_check(const ModelPtr& model, const Configuration& A, const Configuration& B,
                                    const SiteFunction& w, double c_wa, std::vector<double> times,
                                    std::size_t replicates, std::uint64_t seed, unsigned workers = 1);

}  // namespace bdlat
