#include "bdlat/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bdlat/parallel.hpp"
#include "bdlat/stats.hpp"

namespace bdlat {

TildeRates tilde_rates(const Site& x, const Configuration& xi, const Configuration& eta, const RateModel& m1,
                       const RateModel& m2) {
  const int a = xi(x), b = eta(x);
  if (a > b) return {m1.birth(x, xi), m1.death(x, xi)};
  if (a < b) return {m2.birth(x, eta), m2.death(x, eta)};
  return {std::max(m1.birth(x, xi), m2.birth(x, eta)), std::min(m1.death(x, xi), m2.death(x, eta))};
}

//--- hypothesis probing ----------------------------------------------------//

HypothesisProbe probe_comparison_hypotheses(const RateModel& lower, const RateModel& upper, const WindowPtr& window,
                                            std::size_t pairs, std::uint64_t seed, int max_occupancy) {
  auto r1 = lower.bind(window);
  auto r2 = upper.bind(window);
  const int cap1 = std::min(max_occupancy, lower.occupancy_bound().value_or(max_occupancy));
  const int cap2 = std::min(max_occupancy, upper.occupancy_bound().value_or(max_occupancy));
  if (cap2 < cap1) throw ConfigError("upper model cannot hold the occupancies of the lower one");
  const int reach = std::max(lower.interaction_radius(), upper.interaction_radius()) + 1;

  NoiseStream stream(seed, stream_id({0x9B0BEULL}));
  std::uniform_int_distribution<std::size_t> pick_site(0, window->size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> level1(1, std::max(cap1, 1));

  HypothesisProbe out;
  std::vector<int> xi1(window->size(), 0), xi2(window->size(), 0);
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t centre = pick_site(stream);
    const auto near = window->within(centre, reach);
    for (std::size_t j : near) {
      xi1[j] = (cap1 > 0 && coin(stream)) ? level1(stream) : 0;
      int extra = 0;
      if (coin(stream)) extra = std::uniform_int_distribution<int>(1, std::max(1, cap2 - xi1[j]))(stream);
      xi2[j] = std::min(cap2, xi1[j] + extra);
    }
    ++out.pairs;
    for (std::size_t j : window->within(centre, 1)) {
      ++out.checks;
      const double b1 = r1->birth(j, xi1), b2 = r2->birth(j, xi2);
      if (b1 > b2 * (1 + 1e-12) + 1e-15) {
        out.holds = false;
        out.counterexample = "birth at " + window->site(j).str() + ": lower " + std::to_string(b1) + " > upper " +
                             std::to_string(b2);
      } else if (xi1[j] == xi2[j]) {
        const double d1 = r1->death(j, xi1), d2 = r2->death(j, xi2);
        if (d1 < d2 * (1 - 1e-12) - 1e-15) {
          out.holds = false;
          out.counterexample = "death at " + window->site(j).str() + " (occupancy " + std::to_string(xi1[j]) +
                               "): lower " + std::to_string(d1) + " < upper " + std::to_string(d2);
        }
      }
      if (!out.holds) return out;
    }
    for (std::size_t j : near) xi1[j] = xi2[j] = 0;
  }
  return out;
}

std::string to_string(CouplingMethod m) { return m == CouplingMethod::JointGillespie ? "joint-gillespie" : "shared-thinning"; }

CouplingMethod coupling_method_from_string(const std::string& tag) {
  if (tag == "joint-gillespie" || tag == "gillespie") return CouplingMethod::JointGillespie;
  if (tag == "shared-thinning" || tag == "thinning") return CouplingMethod::SharedThinning;
  throw ConfigError("unknown coupling method '" + tag + "' (expected joint-gillespie or shared-thinning)");
}

//--- joint Gillespie -------------------------------------------------------//

namespace {

void check_rates(const SiteRates& r, std::span<const std::size_t> sites, std::span<const int> occ, const double* b,
                 const double* d) {
  const Window& w = r.window();
  for (std::size_t j : sites) {
    if (!(b[j] >= 0.0) || !std::isfinite(b[j]))
      throw ModelError("birth rate at " + w.site(j).str() + " is " + std::to_string(b[j]));
    if (!(d[j] >= 0.0) || !std::isfinite(d[j]))
      throw ModelError("death rate at " + w.site(j).str() + " is " + std::to_string(d[j]));
    if (occ[j] == 0 && d[j] > 0.0) throw ModelError("positive death rate at empty site " + w.site(j).str());
  }
}

}  // namespace

CoupledGillespie::CoupledGillespie(ModelPtr m1, ModelPtr m2, WindowPtr window, std::vector<int> initial1,
                                   std::vector<int> initial2, std::uint64_t seed, std::uint64_t replicate)
    : m1_(std::move(m1)),
      m2_(std::move(m2)),
      r1_(m1_->bind(window)),
      r2_(m2_->bind(window)),
      occ1_(std::move(initial1)),
      occ2_(std::move(initial2)),
      tree_(window->size()),
      stream_(seed, replicate_stream_id(replicate, 1)) {
  const std::size_t n = window->size();
  if (occ1_.size() != n || occ2_.size() != n) throw ConfigError("initial occupancy does not match the window");
  for (std::size_t i = 0; i < n; ++i)
    if (occ1_[i] < 0 || occ2_[i] < 0) throw ConfigError("negative initial occupancy");
  for (auto* v : {&b1_, &d1_, &t1_, &b2_, &d2_, &t2_, &total_}) v->assign(n, 0.0);
  use_first_deps_ = m1_->interaction_radius() >= m2_->interaction_radius();
  all_.resize(n);
  for (std::size_t i = 0; i < n; ++i) all_[i] = i;
  refresh(all_);
}

std::span<const std::size_t> CoupledGillespie::dependents(std::size_t i) const {
  return use_first_deps_ ? r1_->dependents(i) : r2_->dependents(i);
}

void CoupledGillespie::refresh(std::span<const std::size_t> sites) {
  if (!r1_->evaluate(sites, occ1_, b1_.data(), d1_.data(), t1_.data()))
    check_rates(*r1_, sites, occ1_, b1_.data(), d1_.data());
  if (!r2_->evaluate(sites, occ2_, b2_.data(), d2_.data(), t2_.data()))
    check_rates(*r2_, sites, occ2_, b2_.data(), d2_.data());
  for (std::size_t j : sites) total_[j] = std::max(b1_[j], b2_[j]) + std::max(d1_[j], d2_[j]);
  tree_.set_many(sites, total_.data());
}

std::optional<double> CoupledGillespie::advance(double horizon) {
  if (pending_) return pending_time_;
  const double total = tree_.total();
  if (!(total > 0.0)) {
    clock_ = std::max(clock_, horizon);
    return std::nullopt;
  }
  const auto [u_hold, u_pick] = stream_.next_pair();
  const double t = clock_ + NoiseStream::exponential(u_hold, total);
  if (t > horizon) {
    clock_ = horizon;
    return std::nullopt;
  }
  pending_ = true;
  pending_time_ = t;
  pending_u_ = u_pick;
  return t;
}

JointEvent CoupledGillespie::fire() {
  if (!pending_) throw std::logic_error("CoupledGillespie::fire without a pending event");
  pending_ = false;
  double u = pending_u_ * tree_.total();
  const std::size_t i = tree_.find(u);
  JointEvent ev;
  ev.time = pending_time_;
  ev.site = static_cast<std::uint32_t>(i);
  const double bmax = std::max(b1_[i], b2_[i]);
  double r1, r2;
  if (u < bmax || std::max(d1_[i], d2_[i]) <= 0.0) {
    ev.delta = 1;
    ev.channel = Channel::Birth;
    r1 = b1_[i];
    r2 = b2_[i];
  } else {
    u -= bmax;
    ev.delta = -1;
    ev.channel = Channel::Death;
    r1 = d1_[i];
    r2 = d2_[i];
  }
  // u is uniform on [0, max(r1, r2)): the shared mark.
  ev.first = u < r1;
  ev.second = u < r2;
  if (!ev.first && !ev.second) {
    // rounding at the top edge of the channel
    if (r1 >= r2) ev.first = true;
    else ev.second = true;
  }
  if (ev.first) occ1_[i] += ev.delta;
  if (ev.second) occ2_[i] += ev.delta;
  clock_ = pending_time_;
  refresh(dependents(i));
  return ev;
}

//--- reports ---------------------------------------------------------------//

void DominationReport::merge(const DominationReport& o) {
  replicates += o.replicates;
  domination_violations += o.domination_violations;
  inclusion_violations += o.inclusion_violations;
  hypotheses_verified = hypotheses_verified && o.hypotheses_verified;
  clean = clean && o.clean;
  if (o.first_violation && (!first_violation || o.first_violation->replicate < first_violation->replicate ||
                            (o.first_violation->replicate == first_violation->replicate &&
                             o.first_violation->time < first_violation->time)))
    first_violation = o.first_violation;
}

nlohmann::json to_json(const DominationReport& r) {
  nlohmann::json j;
  j["clean"] = r.clean;
  if (r.first_violation) {
    std::vector<int> coords(r.first_violation->site.coords().begin(), r.first_violation->site.coords().end());
    j["first_violation"] = {{"t", r.first_violation->time},
                            {"x", coords},
                            {"replicate", r.first_violation->replicate},
                            {"kind", r.first_violation->kind}};
  } else {
    j["first_violation"] = nullptr;
  }
  j["replicates"] = r.replicates;
  j["domination_violations"] = r.domination_violations;
  j["inclusion_violations"] = r.inclusion_violations;
  j["hypotheses_verified"] = r.hypotheses_verified;
  return j;
}

//--- coupled runs ----------------------------------------------------------//

namespace {

class DominationTracker {
 public:
  DominationTracker(const Window& w, std::uint64_t replicate) : window_(w), replicate_(replicate) {
    report_.replicates = 1;
  }

  // After an event at site i with the current occupancies of both processes.
  void check(double t, std::size_t i, std::span<const int> lower, std::span<const int> upper) {
    if (lower[i] > upper[i]) flag(t, i, "domination", report_.domination_violations);
  }
  void birth_not_shared(double t, std::size_t i) { flag(t, i, "birth-inclusion", report_.inclusion_violations); }

  DominationReport report() const { return report_; }

 private:
  void flag(double t, std::size_t i, const char* kind, std::size_t& counter) {
    ++counter;
    report_.clean = false;
    if (!report_.first_violation) report_.first_violation = Violation{t, window_.site(i), replicate_, kind};
  }

  const Window& window_;
  std::uint64_t replicate_;
  DominationReport report_;
};

void check_initial(const Configuration& eta1, const Configuration& eta2) {
  if (!(eta1.window() == eta2.window())) throw ConfigError("coupled processes must share one window");
}

CoupledRun run_joint(const ModelPtr& m1, const ModelPtr& m2, const Configuration& eta1, const Configuration& eta2,
                     double horizon, std::uint64_t seed, std::uint64_t replicate, const CouplingOptions& opt) {
  const auto& window = eta1.window_ptr();
  CoupledRun out{Trajectory{eta1, eta1, {}, horizon, seed, replicate, m1->tag(), Algorithm::Gillespie},
                 Trajectory{eta2, eta2, {}, horizon, seed, replicate, m2->tag(), Algorithm::Gillespie},
                 {}};
  CoupledGillespie engine(m1, m2, window, eta1.dense(), eta2.dense(), seed, replicate);
  DominationTracker tracker(*window, replicate);
  {
    auto lo = eta1.dense(), up = eta2.dense();
    for (std::size_t i = 0; i < lo.size(); ++i) tracker.check(0.0, i, lo, up);
  }
  std::uint64_t count = 0;
  while (auto t = engine.advance(horizon)) {
    if (++count > opt.max_events)
      throw ExplosionError("explosion guard: more than " + std::to_string(opt.max_events) + " coupled events", *t,
                           count);
    const JointEvent ev = engine.fire();
    if (opt.record_events) {
      if (ev.first) out.lower.events.push_back({ev.time, ev.site, ev.delta, ev.channel});
      if (ev.second) out.upper.events.push_back({ev.time, ev.site, ev.delta, ev.channel});
    }
    if (ev.delta > 0 && ev.first && !ev.second) tracker.birth_not_shared(ev.time, ev.site);
    tracker.check(ev.time, ev.site, engine.first(), engine.second());
  }
  out.lower.final_state = Configuration::from_dense(window, engine.first());
  out.upper.final_state = Configuration::from_dense(window, engine.second());
  out.report = tracker.report();
  return out;
}

CoupledRun run_shared_thinning(const ModelPtr& m1, const ModelPtr& m2, const Configuration& eta1,
                               const Configuration& eta2, double horizon, std::uint64_t seed, std::uint64_t replicate,
                               const CouplingOptions& opt) {
  RunOptions ro;
  ro.algorithm = Algorithm::Thinning;
  ro.max_events = opt.max_events;
  ro.record_events = true;
  CoupledRun out{run(m1, eta1, horizon, seed, replicate, ro), run(m2, eta2, horizon, seed, replicate, ro), {}};
  const Window& w = eta1.window();
  DominationTracker tracker(w, replicate);
  auto lo = eta1.dense(), up = eta2.dense();
  for (std::size_t i = 0; i < lo.size(); ++i) tracker.check(0.0, i, lo, up);
  // Replay both logs in time order. Shared points carry bitwise equal times.
  const auto& a = out.lower.events;
  const auto& b = out.upper.events;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    const bool take_a = ib == b.size() || (ia < a.size() && a[ia].time <= b[ib].time);
    const bool take_b = ia == a.size() || (ib < b.size() && b[ib].time <= a[ia].time);
    if (take_a && take_b && a[ia].site != b[ib].site) {
      // distinct sites at one instant cannot come from one Poisson point
      const auto& e = a[ia];
      lo[e.site] += e.delta;
      if (e.delta > 0) tracker.birth_not_shared(e.time, e.site);
      tracker.check(e.time, e.site, lo, up);
      ++ia;
      continue;
    }
    if (take_a) {
      const auto& e = a[ia++];
      lo[e.site] += e.delta;
      const bool shared = take_b && b[ib].channel == e.channel;
      if (e.delta > 0 && !shared) tracker.birth_not_shared(e.time, e.site);
      if (take_b) {
        const auto& f = b[ib++];
        up[f.site] += f.delta;
      }
      tracker.check(e.time, e.site, lo, up);
    } else {
      const auto& f = b[ib++];
      up[f.site] += f.delta;
      tracker.check(f.time, f.site, lo, up);
    }
  }
  out.report = tracker.report();
  if (!opt.record_events) {
    out.lower.events.clear();
    out.upper.events.clear();
  }
  return out;
}

}  // namespace

CoupledRun run_coupled(const ModelPtr& model1, const ModelPtr& model2, const Configuration& eta1,
                       const Configuration& eta2, double horizon, std::uint64_t seed, std::uint64_t replicate,
                       const CouplingOptions& options) {
  check_initial(eta1, eta2);
  if (options.method == CouplingMethod::JointGillespie)
    return run_joint(model1, model2, eta1, eta2, horizon, seed, replicate, options);
  return run_shared_thinning(model1, model2, eta1, eta2, horizon, seed, replicate, options);
}

DominationReport coupling_experiment(const ModelPtr& model1, const ModelPtr& model2, const Configuration& eta1,
                                     const Configuration& eta2, double horizon, std::uint64_t seed,
                                     std::size_t replicates, unsigned workers, const CouplingOptions& options,
                                     std::size_t probe_pairs) {
  check_initial(eta1, eta2);
  const bool ordered = eta1.dominated_by(eta2);
  const HypothesisProbe probe =
      probe_comparison_hypotheses(*model1, *model2, eta1.window_ptr(), probe_pairs, seed);
  CouplingOptions opt = options;
  opt.record_events = false;
  auto reports = map_replicates(replicates, workers, [&](std::size_t r) {
    return run_coupled(model1, model2, eta1, eta2, horizon, seed, r, opt).report;
  });
  DominationReport total;
  total.replicates = 0;
  for (const auto& r : reports) total.merge(r);
  total.hypotheses_verified = probe.holds && ordered;
  if (!total.hypotheses_verified) total.clean = false;
  return total;
}

//--- contraction -----------------------------------------------------------//

ContractionResult contraction_check(const ModelPtr& model, const Configuration& A, const Configuration& B,
                                    const SiteFunction& w, double c_wa, std::vector<double> times,
                                    std::size_t replicates, std::uint64_t seed, unsigned workers) {
  check_initial(A, B);
  if (times.empty()) throw ConfigError("contraction_check needs at least one time");
  std::sort(times.begin(), times.end());
  if (times.front() < 0.0) throw ConfigError("times must be >= 0");
  const auto& window = A.window_ptr();
  std::vector<double> weight(window->size());
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = w(window->site(i));
  auto distance = [&](std::span<const int> x, std::span<const int> y) {
    std::vector<double> terms(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = weight[i] * std::abs(x[i] - y[i]);
    return pairwise_sum(terms);
  };
  const auto a0 = A.dense(), b0 = B.dense();
  const double d0 = distance(a0, b0);

  struct Sample {
    std::vector<double> d;
    int max_occ = 0;
  };
  auto samples = map_replicates(replicates, workers, [&](std::size_t r) {
    Sample s;
    CoupledGillespie engine(model, model, window, a0, b0, seed, r);
    auto track = [&] {
      for (int n : engine.first()) s.max_occ = std::max(s.max_occ, n);
      for (int n : engine.second()) s.max_occ = std::max(s.max_occ, n);
    };
    track();
    std::uint64_t count = 0;
    for (double t : times) {
      while (engine.advance(t)) {
        if (++count > kDefaultMaxEvents) throw ExplosionError("explosion guard in contraction_check", t, count);
        engine.fire();
        track();
      }
      s.d.push_back(distance(engine.first(), engine.second()));
    }
    return s;
  });

  ContractionResult out;
  for (const auto& s : samples) out.max_occupancy = std::max(out.max_occupancy, s.max_occ);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> v(replicates);
    for (std::size_t r = 0; r < replicates; ++r) v[r] = samples[r].d[k];
    const MeanEstimate m = mean_estimate(v);
    ContractionRow row;
    row.t = times[k];
    row.lhs = m.mean;
    row.std_error = m.std_error;
    row.bound = d0 * std::exp(4.0 * c_wa * times[k]);
    row.ok = row.lhs <= row.bound + 3.0 * row.std_error;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace bdlat
