#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdlat/configuration.hpp"
#include "bdlat/errors.hpp"
#include "bdlat/random.hpp"
#include "bdlat/rates.hpp"

namespace bdlat {

inline constexpr std::uint64_t kDefaultMaxEvents = 10'000'000;

struct EventRecord {
  double time = 0.0;
  std::uint32_t site = 0;  // window index
  std::int8_t delta = 0;   // +1 birth, -1 death
  Channel channel = Channel::Birth;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

enum class Algorithm { Gillespie, Thinning };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& tag);

/// Tree of partial sums over non-negative leaf weights, fan-out 8. Parents
/// are recomputed from their children on every update, so the total never
/// drifts.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves = 0);

  void set(std::size_t leaf, double weight);
  /// Sets several leaves (ascending indices) and repairs the ancestors once.
  void set_many(std::span<const std::size_t> leaves, const double* weights);
  double get(std::size_t leaf) const { return nodes_[leaf]; }
  double total() const { return nodes_.back(); }
  std::size_t size() const { return leaves_; }

  /// Leaf i with prefix(i) <= target < prefix(i+1); `target` is replaced by
  /// the offset inside that leaf. Never returns a zero-weight leaf while the
  /// total is positive.
  std::size_t find(double& target) const;

 private:
  static constexpr std::size_t kFan = 8;
  void repair(std::size_t lo, std::size_t hi);

  std::size_t leaves_ = 0;
  std::vector<std::size_t> offset_;  // start of each level, leaves first
  std::vector<double> nodes_;
};

/// Total-rate (direct method) simulation: exponential holding time with the
/// total rate, then one event chosen with probability proportional to its
/// rate. Randomness comes from one per-replicate stream, separate from the
/// site streams used by thinning.
class GillespieEngine {
 public:
  GillespieEngine(ModelPtr model, WindowPtr window, std::vector<int> initial, std::uint64_t seed,
                  std::uint64_t replicate);

  /// Time of the next event if it occurs at or before `horizon`; otherwise
  /// the clock moves to the horizon and nullopt is returned. A zero total
  /// rate means the state is absorbing.
  std::optional<double> advance(double horizon);
  /// Applies the event found by the last advance().
  EventRecord fire();

  double clock() const { return clock_; }
  std::span<const int> occupancy() const { return occ_; }
  double total_rate() const { return tree_.total(); }
  double birth_rate(std::size_t i) const { return birth_[i]; }
  double death_rate(std::size_t i) const { return death_[i]; }
  const SiteRates& rates() const { return *rates_; }
  const Window& window() const { return rates_->window(); }

  /// Throws ModelError if the cached rates differ from a full recomputation.
  void audit() const;

 private:
  void refresh(std::span<const std::size_t> sites);

  ModelPtr model_;
  std::unique_ptr<SiteRates> rates_;
  std::vector<int> occ_;
  std::vector<double> birth_, death_, total_;
  std::vector<std::size_t> all_;
  SumTree tree_;
  NoiseStream stream_;
  // Each stream block yields four 32-bit uniforms: the holding-time and
  // selection draws of two consecutive events.
  std::array<std::uint32_t, 4> quad_{};
  std::uint64_t quad_counter_ = 0;
  int quad_left_ = 0;
  double clock_ = 0.0;
  bool pending_ = false;
  double pending_time_ = 0.0;
  double pending_u_ = 0.0;
};

struct ThinningOptions {
  /// Width U of the first mark layer; layer k >= 1 covers [U 2^{k-1}, U 2^k).
  double layer_width = 1.0;
  /// Length of the time blocks each layer stream is cut into.
  double block_duration = 1.0;
  bool record_candidates = false;
};

/// A point (s, u) of a site's Poisson noise that was tested against a rate.
struct Candidate {
  double time = 0.0;
  std::uint32_t site = 0;
  Channel channel = Channel::Birth;
  double mark = 0.0;
  bool accepted = false;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Literal pathwise construction: every site carries a birth and a death
/// Poisson point process on time x marks with unit intensity. A point (s, u)
/// fires iff u < rate(x, eta_{s-}). Only marks below a dominating bound are
/// generated; the bound is the pure-birth envelope (births) or the current
/// death rate (deaths), refreshed around every accepted event.
///
/// The noise is a pure function of (seed, site coordinates, channel,
/// replicate), independent of the model, so two runs with the same seed see
/// the same (s, u) points wherever both look.
class ThinningEngine {
 public:
  ThinningEngine(ModelPtr model, ModelPtr envelope, WindowPtr window, std::vector<int> initial, std::uint64_t seed,
                 std::uint64_t replicate, ThinningOptions options = {});

  std::optional<double> advance(double horizon);
  EventRecord fire();

  double clock() const { return clock_; }
  std::span<const int> occupancy() const { return occ_; }
  const Window& window() const { return rates_->window(); }
  const std::vector<Candidate>& candidates() const { return candidates_; }
  std::uint64_t candidates_tested() const { return tested_; }

 private:
  static constexpr std::uint32_t kMaxLayers = 64;

  struct Layer {
    std::uint64_t block = 0;
    NoiseStream stream;
    double time = 0.0;  // current point
    double mark = 0.0;
    bool started = false;
  };
  struct Slot {  // one (site, channel)
    double bound = 0.0;
    std::uint32_t active = 0;
    std::vector<Layer> layers;
    double head = 0.0;  // earliest point over the active layers
    std::uint32_t head_layer = 0;
  };

  std::uint32_t layers_for(double bound) const;
  void start_layer(std::size_t site, int channel, std::size_t k, double after);
  void next_point(std::size_t site, int channel, std::size_t k);
  void refresh(std::size_t i);
  Slot& slot(std::size_t i, int channel) { return slots_[2 * i + static_cast<std::size_t>(channel)]; }

  // Indexed binary min-heap of slot indices keyed by (head, slot index).
  bool before(std::uint32_t a, std::uint32_t b) const {
    return slots_[a].head < slots_[b].head || (slots_[a].head == slots_[b].head && a < b);
  }
  void update_head(std::uint32_t s);
  void sift(std::uint32_t s);

  ModelPtr model_, envelope_;
  std::unique_ptr<SiteRates> rates_, bounds_;
  std::vector<int> occ_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> heap_;
  std::vector<std::uint32_t> heap_pos_;
  std::vector<double> lower_, width_;  // mark range of each layer
  std::uint64_t seed_, replicate_;
  ThinningOptions options_;
  double clock_ = 0.0;
  bool pending_ = false;
  double pending_time_ = 0.0;
  std::uint32_t pending_site_ = 0;
  int pending_channel_ = 0;
  std::vector<Candidate> candidates_;
  std::uint64_t tested_ = 0;
};

/// Drives an engine to `horizon`, reporting every constant stretch of the
/// path to observer.segment(t0, t1, occ) and every jump to
/// observer.event(record, occ_after). Both hooks are optional.
template <class Engine, class Observer>
void simulate(Engine& engine, double horizon, Observer&& observer, std::uint64_t max_events = kDefaultMaxEvents) {
  std::uint64_t count = 0;
  while (true) {
    const double t0 = engine.clock();
    auto next = engine.advance(horizon);
    const double t1 = next ? *next : horizon;
    if constexpr (requires { observer.segment(t0, t1, engine.occupancy()); }) {
      if (t1 > t0) observer.segment(t0, t1, engine.occupancy());
    }
    if (!next) return;
    if (++count > max_events)
      throw ExplosionError("explosion guard: more than " + std::to_string(max_events) + " events before t=" +
                               std::to_string(*next),
                           *next, count);
    const EventRecord ev = engine.fire();
    if constexpr (requires { observer.event(ev, engine.occupancy()); }) observer.event(ev, engine.occupancy());
  }
}

struct RunOptions {
  Algorithm algorithm = Algorithm::Gillespie;
  std::uint64_t max_events = kDefaultMaxEvents;
  bool record_events = true;
  /// Compare the rate cache with a full recomputation every this many events
  /// (Gillespie only; 0 = never).
  std::uint64_t audit_every = 0;
  /// Thinning bound for births; defaults to pure_birth_envelope(model).
  ModelPtr envelope;
  ThinningOptions thinning;
};

struct Trajectory {
  Configuration initial;
  Configuration final_state;
  std::vector<EventRecord> events;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::string model_tag;
  Algorithm algorithm = Algorithm::Gillespie;

  const Site& site(const EventRecord& e) const { return initial.window().site(e.site); }
};

/// One trajectory on [0, horizon] from eta0 (on eta0's window). Output is a
/// pure function of the inputs. Throws ExplosionError past max_events.
Trajectory run(const ModelPtr& model, const Configuration& eta0, double horizon, std::uint64_t seed,
               std::uint64_t replicate = 0, const RunOptions& options = {});

/// Occupancy vectors of replicates 0..n-1 at each of the ascending `times`:
/// result[k][r] is replicate r at times[k].
std::vector<std::vector<std::vector<int>>> sample_states(const ModelPtr& model, const Configuration& eta0,
                                                          const std::vector<double>& times, std::size_t replicates,
                                                          std::uint64_t seed, unsigned workers = 1,
                                                          const RunOptions& options = {});

struct MarginalRow {
  int radius = 0;
  std::map<int, double> law;  // law of eta_T(origin)
  std::optional<double> tv_to_previous;
};

/// Law of eta_T(origin) on growing ball windows, replicate r of every radius
/// sharing the same seed. With the thinning engine the noise is keyed by
/// absolute site coordinates, so runs on different radii agree wherever the
/// frozen boundary has not been felt.
std::vector<MarginalRow> window_convergence(const ModelPtr& model, const Configuration& eta0, double horizon,
                                            const std::vector<int>& radii, std::uint64_t seed,
                                            std::size_t replicates, unsigned workers = 1,
                                            Algorithm algorithm = Algorithm::Thinning);

/// Re-embeds eta's counts into another window; throws ConfigError if some
/// occupied site falls outside it.
Configuration embed(const Configuration& eta, WindowPtr window);

}  // namespace bdlat
