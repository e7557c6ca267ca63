#include "bdlat/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bdlat/parallel.hpp"
#include "bdlat/stats.hpp"

namespace bdlat {

std::string to_string(Algorithm a) { return a == Algorithm::Gillespie ? "gillespie" : "thinning"; }

Algorithm algorithm_from_string(const std::string& tag) {
  if (tag == "gillespie") return Algorithm::Gillespie;
  if (tag == "thinning") return Algorithm::Thinning;
  throw ConfigError("unknown algorithm '" + tag + "' (expected gillespie or thinning)");
}

//--- SumTree ---------------------------------------------------------------//

SumTree::SumTree(std::size_t leaves) : leaves_(leaves) {
  std::size_t n = std::max<std::size_t>(leaves, 1);
  std::size_t offset = 0;
  while (true) {
    offset_.push_back(offset);
    const std::size_t padded = n == 1 ? 1 : (n + kFan - 1) / kFan * kFan;
    offset += padded;
    if (n == 1) break;
    n = (n + kFan - 1) / kFan;
  }
  nodes_.assign(offset, 0.0);
}

void SumTree::repair(std::size_t lo, std::size_t hi) {
  for (std::size_t l = 1; l < offset_.size(); ++l) {
    lo /= kFan;
    hi /= kFan;
    const double* child = nodes_.data() + offset_[l - 1];
    double* node = nodes_.data() + offset_[l];
    for (std::size_t k = lo; k <= hi; ++k) {
      const double* c = child + kFan * k;
      node[k] = ((c[0] + c[1]) + (c[2] + c[3])) + ((c[4] + c[5]) + (c[6] + c[7]));
    }
  }
}

void SumTree::set(std::size_t leaf, double weight) {
  nodes_[leaf] = weight;
  repair(leaf, leaf);
}

void SumTree::set_many(std::span<const std::size_t> leaves, const double* weights) {
  if (leaves.empty()) return;
  for (std::size_t leaf : leaves) nodes_[leaf] = weights[leaf];
  repair(leaves.front(), leaves.back());
}

std::size_t SumTree::find(double& target) const {
  std::size_t idx = 0;
  if (target < 0.0) target = 0.0;
  for (std::size_t l = offset_.size() - 1; l-- > 0;) {
    const double* c = nodes_.data() + offset_[l] + kFan * idx;
    std::size_t pick = kFan;
    for (std::size_t j = 0; j < kFan; ++j) {
      if (target < c[j]) {
        pick = j;
        break;
      }
      target -= c[j];
    }
    if (pick == kFan) {
      // Rounding pushed the target past the last child: take the last
      // positive one.
      pick = kFan - 1;
      while (pick > 0 && !(c[pick] > 0.0)) --pick;
      target = c[pick] * (1.0 - 0x1.0p-52);
    }
    idx = kFan * idx + pick;
  }
  return idx;
}

//--- Gillespie -------------------------------------------------------------//

namespace {

[[noreturn, gnu::noinline, gnu::cold]] void bad_rate(double r, const Window& w, std::size_t i, const char* what) {
  throw ModelError(std::string(what) + " rate at " + w.site(i).str() + " is " + std::to_string(r));
}

inline double checked_rate(double r, const Window& w, std::size_t i, const char* what) {
  if (!(r >= 0.0 && r <= std::numeric_limits<double>::max())) [[unlikely]]
    bad_rate(r, w, i, what);
  return r;
}

std::vector<int> checked_initial(const Window& w, std::vector<int> initial) {
  if (initial.size() != w.size()) throw ConfigError("initial occupancy does not match the window");
  for (int n : initial)
    if (n < 0) throw ConfigError("negative initial occupancy");
  return initial;
}

}  // namespace

GillespieEngine::GillespieEngine(ModelPtr model, WindowPtr window, std::vector<int> initial, std::uint64_t seed,
                                 std::uint64_t replicate)
    : model_(std::move(model)),
      rates_(model_->bind(window)),
      occ_(checked_initial(*window, std::move(initial))),
      birth_(occ_.size(), 0.0),
      death_(occ_.size(), 0.0),
      total_(occ_.size(), 0.0),
      all_(occ_.size()),
      tree_(occ_.size()),
      stream_(seed, replicate_stream_id(replicate)) {
  for (std::size_t i = 0; i < occ_.size(); ++i) all_[i] = i;
  refresh(all_);
}

void GillespieEngine::refresh(std::span<const std::size_t> sites) {
  if (!rates_->evaluate(sites, occ_, birth_.data(), death_.data(), total_.data())) [[unlikely]] {
    const Window& w = rates_->window();
    for (std::size_t j : sites) {
      checked_rate(birth_[j], w, j, "birth");
      checked_rate(death_[j], w, j, "death");
      if (occ_[j] == 0 && death_[j] > 0.0) throw ModelError("positive death rate at empty site " + w.site(j).str());
    }
  }
  tree_.set_many(sites, total_.data());
}

std::optional<double> GillespieEngine::advance(double horizon) {
  if (pending_) return pending_time_;
  const double total = tree_.total();
  if (!(total > 0.0)) {
    clock_ = std::max(clock_, horizon);
    return std::nullopt;
  }
  if (quad_left_ == 0) {
    quad_ = stream_.block(quad_counter_++);
    quad_left_ = 2;
  }
  const std::size_t q = 2 * static_cast<std::size_t>(2 - quad_left_--);
  const double u_hold = NoiseStream::to_unit32(quad_[q]);
  const double u_pick = NoiseStream::to_unit32(quad_[q + 1]);
  const double t = clock_ - std::log(u_hold) / total;
  if (t > horizon) {
    clock_ = horizon;
    return std::nullopt;
  }
  pending_ = true;
  pending_time_ = t;
  pending_u_ = u_pick;
  return t;
}

EventRecord GillespieEngine::fire() {
  if (!pending_) throw std::logic_error("GillespieEngine::fire without a pending event");
  pending_ = false;
  double target = pending_u_ * tree_.total();
  const std::size_t i = tree_.find(target);
  EventRecord ev;
  ev.time = pending_time_;
  ev.site = static_cast<std::uint32_t>(i);
  if (target < birth_[i] || death_[i] <= 0.0) {
    ev.delta = 1;
    ev.channel = Channel::Birth;
    ++occ_[i];
  } else {
    ev.delta = -1;
    ev.channel = Channel::Death;
    --occ_[i];
  }
  clock_ = pending_time_;
  refresh(rates_->dependents(i));
  return ev;
}

void GillespieEngine::audit() const {
  const Window& w = rates_->window();
  for (std::size_t i = 0; i < occ_.size(); ++i) {
    const double b = rates_->birth(i, occ_);
    const double d = rates_->death(i, occ_);
    if (b != birth_[i] || d != death_[i])
      throw ModelError("rate cache out of date at " + w.site(i).str() + " (cached " + std::to_string(birth_[i]) +
                       "/" + std::to_string(death_[i]) + ", fresh " + std::to_string(b) + "/" + std::to_string(d) +
                       ")");
    if (tree_.get(i) != birth_[i] + death_[i]) throw ModelError("sum tree out of date at " + w.site(i).str());
  }
}

//--- thinning --------------------------------------------------------------//

ThinningEngine::ThinningEngine(ModelPtr model, ModelPtr envelope, WindowPtr window, std::vector<int> initial,
                               std::uint64_t seed, std::uint64_t replicate, ThinningOptions options)
    : model_(std::move(model)),
      envelope_(envelope ? std::move(envelope) : pure_birth_envelope(model_)),
      rates_(model_->bind(window)),
      bounds_(envelope_->bind(window)),
      occ_(checked_initial(*window, std::move(initial))),
      slots_(2 * occ_.size()),
      seed_(seed),
      replicate_(replicate),
      options_(options) {
  if (!(options_.layer_width > 0.0) || !(options_.block_duration > 0.0))
    throw ConfigError("thinning layer width and block duration must be positive");
  if (envelope_->interaction_radius() > model_->interaction_radius())
    throw ConfigError("thinning envelope reaches further than the model it bounds");
  for (std::uint32_t k = 0; k <= kMaxLayers; ++k) {
    lower_.push_back(k == 0 ? 0.0 : std::ldexp(options_.layer_width, static_cast<int>(k) - 1));
    width_.push_back(k == 0 ? options_.layer_width : std::ldexp(options_.layer_width, static_cast<int>(k) - 1));
  }
  heap_.resize(slots_.size());
  heap_pos_.resize(slots_.size());
  for (std::uint32_t s = 0; s < slots_.size(); ++s) {
    slots_[s].head = std::numeric_limits<double>::infinity();
    heap_[s] = s;
    heap_pos_[s] = s;
  }
  for (std::size_t i = 0; i < occ_.size(); ++i) refresh(i);
}

std::uint32_t ThinningEngine::layers_for(double bound) const {
  std::uint32_t n = 0;
  while (n <= kMaxLayers && lower_[n] < bound) ++n;
  return n;
}

void ThinningEngine::next_point(std::size_t site, int channel, std::size_t k) {
  Layer& L = slot(site, channel).layers[k];
  const double width = width_[k];
  while (true) {
    const auto [u_gap, u_mark] = L.stream.next_pair();
    const double t = L.time + NoiseStream::exponential(u_gap, width);
    const double block_end = static_cast<double>(L.block + 1) * options_.block_duration;
    if (t >= block_end) {
      // Poisson increments are independent across blocks: restart the next
      // block from its own stream.
      ++L.block;
      L.stream = NoiseStream(seed_, site_stream_id(window().site(site), channel == 0 ? Channel::Birth : Channel::Death,
                                                   replicate_, k, L.block));
      L.time = block_end;
      continue;
    }
    L.time = t;
    L.mark = lower_[k] + width * u_mark;
    return;
  }
}

void ThinningEngine::start_layer(std::size_t site, int channel, std::size_t k, double after) {
  Slot& s = slot(site, channel);
  if (s.layers.size() <= k) s.layers.resize(k + 1);
  Layer& L = s.layers[k];
  // A layer that was active before still holds its next point; walking on
  // from there produces the same points as regenerating its block, and
  // costs nothing when the layer was off only briefly.
  const auto block = static_cast<std::uint64_t>(std::floor(after / options_.block_duration));
  if (!L.started || L.block < block) {
    L.block = block;
    L.stream = NoiseStream(seed_, site_stream_id(window().site(site), channel == 0 ? Channel::Birth : Channel::Death,
                                                 replicate_, k, L.block));
    L.time = static_cast<double>(L.block) * options_.block_duration;
    L.started = true;
    next_point(site, channel, k);
  }
  while (L.time <= after) next_point(site, channel, k);
}

void ThinningEngine::update_head(std::uint32_t index) {
  Slot& s = slots_[index];
  s.head = std::numeric_limits<double>::infinity();
  for (std::uint32_t k = 0; k < s.active; ++k)
    if (s.layers[k].time < s.head) {
      s.head = s.layers[k].time;
      s.head_layer = k;
    }
  sift(index);
}

void ThinningEngine::sift(std::uint32_t index) {
  std::size_t p = heap_pos_[index];
  while (p > 0) {
    const std::size_t parent = (p - 1) / 2;
    if (!before(index, heap_[parent])) break;
    heap_[p] = heap_[parent];
    heap_pos_[heap_[p]] = static_cast<std::uint32_t>(p);
    p = parent;
  }
  const std::size_t n = heap_.size();
  while (true) {
    std::size_t c = 2 * p + 1;
    if (c >= n) break;
    if (c + 1 < n && before(heap_[c + 1], heap_[c])) ++c;
    if (!before(heap_[c], index)) break;
    heap_[p] = heap_[c];
    heap_pos_[heap_[p]] = static_cast<std::uint32_t>(p);
    p = c;
  }
  heap_[p] = index;
  heap_pos_[index] = static_cast<std::uint32_t>(p);
}

void ThinningEngine::refresh(std::size_t i) {
  const Window& w = window();
  const double bounds[2] = {checked_rate(bounds_->birth(i, occ_), w, i, "envelope birth"),
                            checked_rate(rates_->death(i, occ_), w, i, "death")};
  for (int c = 0; c < 2; ++c) {
    Slot& s = slot(i, c);
    s.bound = bounds[c];
    const std::uint32_t want = layers_for(s.bound);
    if (want > kMaxLayers) throw ModelError("rate bound at " + w.site(i).str() + " is too large for thinning");
    for (std::uint32_t k = s.active; k < want; ++k) start_layer(i, c, k, clock_);
    if (want != s.active || want > 0) {
      s.active = want;
      update_head(static_cast<std::uint32_t>(2 * i + static_cast<std::size_t>(c)));
    }
  }
}

std::optional<double> ThinningEngine::advance(double horizon) {
  if (pending_) return pending_time_;
  while (true) {
    const std::uint32_t top = heap_.front();
    Slot& s = slots_[top];
    if (!(s.head <= horizon)) {
      clock_ = std::max(clock_, horizon);
      return std::nullopt;
    }
    const std::uint32_t site = top / 2;
    const int channel = static_cast<int>(top % 2);
    Layer& L = s.layers[s.head_layer];
    const double t = L.time;
    const double mark = L.mark;
    next_point(site, channel, s.head_layer);
    update_head(top);

    clock_ = t;
    // The top layer overshoots the bound; points above it are not candidates.
    if (mark >= s.bound) continue;
    ++tested_;
    const double rate = channel == 0 ? rates_->birth(site, occ_) : rates_->death(site, occ_);
    checked_rate(rate, window(), site, channel == 0 ? "birth" : "death");
    if (rate > s.bound * (1.0 + 1e-12))
      throw EnvelopeError("thinning bound violated at " + window().site(site).str() + ": rate " +
                          std::to_string(rate) + " > bound " + std::to_string(s.bound));
    const bool accepted = mark < rate;
    if (options_.record_candidates)
      candidates_.push_back({t, site, channel == 0 ? Channel::Birth : Channel::Death, mark, accepted});
    if (accepted) {
      if (channel == 1 && occ_[site] == 0)
        throw ModelError("positive death rate at empty site " + window().site(site).str());
      pending_ = true;
      pending_time_ = t;
      pending_site_ = site;
      pending_channel_ = channel;
      return t;
    }
  }
}

EventRecord ThinningEngine::fire() {
  if (!pending_) throw std::logic_error("ThinningEngine::fire without a pending event");
  pending_ = false;
  EventRecord ev;
  ev.time = pending_time_;
  ev.site = pending_site_;
  if (pending_channel_ == 0) {
    ev.delta = 1;
    ev.channel = Channel::Birth;
    ++occ_[pending_site_];
  } else {
    ev.delta = -1;
    ev.channel = Channel::Death;
    --occ_[pending_site_];
  }
  clock_ = pending_time_;
  for (auto j : rates_->dependents(pending_site_)) refresh(j);
  return ev;
}

//--- run -------------------------------------------------------------------//

namespace {

struct Recorder {
  std::vector<EventRecord>* events;
  void event(const EventRecord& e, std::span<const int>) {
    if (events) events->push_back(e);
  }
};

template <class Engine>
struct AuditingRecorder {
  Engine& engine;
  std::vector<EventRecord>* events;
  std::uint64_t every;
  std::uint64_t count = 0;
  void event(const EventRecord& e, std::span<const int>) {
    if (events) events->push_back(e);
    if (++count % every == 0) engine.audit();
  }
};

}  // namespace

Trajectory run(const ModelPtr& model, const Configuration& eta0, double horizon, std::uint64_t seed,
               std::uint64_t replicate, const RunOptions& options) {
  if (!model) throw ConfigError("run: null model");
  if (!(horizon >= 0.0)) throw ConfigError("horizon must be >= 0");
  Trajectory tr{eta0, eta0, {}, horizon, seed, replicate, model->tag(), options.algorithm};
  auto* log = options.record_events ? &tr.events : nullptr;
  const auto& window = eta0.window_ptr();
  if (options.algorithm == Algorithm::Gillespie) {
    GillespieEngine engine(model, window, eta0.dense(), seed, replicate);
    if (options.audit_every > 0) {
      AuditingRecorder<GillespieEngine> rec{engine, log, options.audit_every};
      simulate(engine, horizon, rec, options.max_events);
      engine.audit();
    } else {
      simulate(engine, horizon, Recorder{log}, options.max_events);
    }
    tr.final_state = Configuration::from_dense(window, engine.occupancy());
  } else {
    ThinningEngine engine(model, options.envelope, window, eta0.dense(), seed, replicate, options.thinning);
    simulate(engine, horizon, Recorder{log}, options.max_events);
    tr.final_state = Configuration::from_dense(window, engine.occupancy());
  }
  return tr;
}

namespace {

struct EventCounter {
  std::uint64_t& count;
  void event(const EventRecord&, std::span<const int>) { ++count; }
};

template <class Engine>
std::vector<std::vector<int>> states_at(Engine& engine, const std::vector<double>& times, std::uint64_t max_events) {
  std::vector<std::vector<int>> out;
  out.reserve(times.size());
  std::uint64_t used = 0;
  for (double t : times) {
    const std::uint64_t budget = max_events - used;
    std::uint64_t count = 0;
    simulate(engine, t, EventCounter{count}, budget);
    used += count;
    const auto occ = engine.occupancy();
    out.emplace_back(occ.begin(), occ.end());
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::vector<int>>> sample_states(const ModelPtr& model, const Configuration& eta0,
                                                          const std::vector<double>& times, std::size_t replicates,
                                                          std::uint64_t seed, unsigned workers,
                                                          const RunOptions& options) {
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && !(times.front() >= 0.0)))
    throw ConfigError("sample times must be ascending and non-negative");
  const auto& window = eta0.window_ptr();
  auto per_replicate = map_replicates(replicates, workers, [&](std::size_t r) {
    if (options.algorithm == Algorithm::Gillespie) {
      GillespieEngine engine(model, window, eta0.dense(), seed, r);
      return states_at(engine, times, options.max_events);
    }
    ThinningEngine engine(model, options.envelope, window, eta0.dense(), seed, r, options.thinning);
    return states_at(engine, times, options.max_events);
  });
  std::vector<std::vector<std::vector<int>>> out(times.size(), std::vector<std::vector<int>>(replicates));
  for (std::size_t r = 0; r < replicates; ++r)
    for (std::size_t k = 0; k < times.size(); ++k) out[k][r] = std::move(per_replicate[r][k]);
  return out;
}

Configuration embed(const Configuration& eta, WindowPtr window) {
  Configuration out(std::move(window));
  for (const auto& [x, n] : eta.counts()) {
    if (!out.window().contains(x)) throw ConfigError("site " + x.str() + " does not fit in the target window");
    out.set(x, n);
  }
  return out;
}

std::vector<MarginalRow> window_convergence(const ModelPtr& model, const Configuration& eta0, double horizon,
                                            const std::vector<int>& radii, std::uint64_t seed,
                                            std::size_t replicates, unsigned workers, Algorithm algorithm) {
  if (radii.empty()) throw ConfigError("window_convergence needs at least one radius");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (radii[k] <= radii[k - 1]) throw ConfigError("window radii must be increasing");
  const int dim = eta0.window().dim();
  const Site origin = Site::origin(dim);
  std::vector<MarginalRow> rows;
  for (int radius : radii) {
    auto window = Window::ball(dim, radius);
    const Configuration start = embed(eta0, window);
    const std::size_t o = *window->index_of(origin);
    auto at_origin = map_replicates(replicates, workers, [&](std::size_t r) {
      RunOptions opt;
      opt.algorithm = algorithm;
      opt.record_events = false;
      return run(model, start, horizon, seed, r, opt).final_state.dense()[o];
    });
    MarginalRow row;
    row.radius = radius;
    for (int n : at_origin) row.law[n] += 1.0 / static_cast<double>(replicates);
    if (!rows.empty()) row.tv_to_previous = tv_distance(rows.back().law, row.law);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bdlat
