#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "bdlat/engine.hpp"
#include "bdlat/errors.hpp"
#include "bdlat/rates.hpp"
#include "bdlat/stats.hpp"

using namespace bdlat;

namespace {

ModelPtr pure_death() { return bpdl_rates({0.0, 1.0, Kernel::zero(1), Kernel::zero(1)}); }

// Each of n particles dies independently at rate 1.
double binomial_survivors(int n, int k, double t) {
  const double p = std::exp(-t);
  return std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)) * std::pow(p, k) *
         std::pow(1 - p, n - k);
}

std::map<int, double> empirical_origin(const ModelPtr& model, const Configuration& eta0, double t, std::size_t n,
                                       Algorithm alg, std::uint64_t seed) {
  RunOptions opt;
  opt.algorithm = alg;
  auto samples = sample_states(model, eta0, {t}, n, seed, 1, opt);
  const auto origin = *eta0.window().index_of(Site::origin(eta0.window().dim()));
  std::map<int, double> law;
  for (const auto& occ : samples[0]) law[occ[origin]] += 1.0 / static_cast<double>(n);
  return law;
}

}  // namespace

TEST_CASE("sum tree selection") {
  SumTree tree(20);
  for (std::size_t i = 0; i < 20; ++i) tree.set(i, (i % 3 == 0) ? 0.0 : static_cast<double>(i));
  double expect = 0.0;
  for (std::size_t i = 0; i < 20; ++i) expect += tree.get(i);
  CHECK(tree.total() == expect);
  double prefix = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    if (tree.get(i) == 0.0) continue;
    double target = prefix + 0.25 * tree.get(i);
    CHECK(tree.find(target) == i);
    CHECK(target == doctest::Approx(0.25 * tree.get(i)));
    prefix += tree.get(i);
  }
  std::vector<std::size_t> leaves = {1, 2, 7};
  std::vector<double> w = {0.0, 0.0, 0.0};
  tree.set_many(leaves, w.data());
  CHECK(tree.total() == doctest::Approx(expect - 1 - 2 - 7));
  // never lands on an empty leaf
  for (double u = 0.0; u < 1.0; u += 0.001) {
    double target = u * tree.total();
    CHECK(tree.get(tree.find(target)) > 0.0);
  }
}

TEST_CASE("absorbing and trivial runs") {
  auto w = Window::ball(1, 3);
  auto empty = Configuration(w);
  for (auto alg : {Algorithm::Gillespie, Algorithm::Thinning}) {
    RunOptions opt;
    opt.algorithm = alg;
    auto tr = run(contact_rates(1.0), empty, 10.0, 1, 0, opt);
    CHECK(tr.events.empty());
    CHECK(tr.final_state == empty);

    auto eta = Configuration::delta(w, Site{0}, 3);
    auto zero = run(bpdl_rates({1.0, 1.0, Kernel::zero(1), Kernel::zero(1)}), eta, 0.0, 1, 0, opt);
    CHECK(zero.events.empty());
    CHECK(zero.final_state == eta);
  }
}

TEST_CASE("single positive rate fires with probability one") {
  auto w = Window::from_sites({Site{0}});
  auto model = bpdl_rates({0.5, 2.0, Kernel::zero(1), Kernel::zero(1)});
  std::vector<double> waits;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    GillespieEngine e(model, w, {0}, 11, r);
    auto t = e.advance(1e9);
    REQUIRE(t.has_value());
    waits.push_back(*t);
    CHECK(e.fire().delta == 1);
  }
  auto m = mean_estimate(waits);
  CHECK(std::abs(m.mean - 2.0) <= 3 * m.std_error);
}

TEST_CASE("birth and death equally likely from one particle") {
  auto w = Window::from_sites({Site{0}});
  auto model = bpdl_rates({1.0, 1.0, Kernel::zero(1), Kernel::zero(1)});
  std::size_t births = 0;
  const std::size_t n = 20000;
  for (std::uint64_t r = 0; r < n; ++r) {
    GillespieEngine e(model, w, {1}, 3, r);
    REQUIRE(e.advance(1e9).has_value());
    births += e.fire().delta == 1;
  }
  const double p = static_cast<double>(births) / n;
  CHECK(std::abs(p - 0.5) <= 3 * std::sqrt(0.25 / n));
}

TEST_CASE("pure death matches the binomial law on both engines") {
  auto w = Window::from_sites({Site{0}});
  auto eta0 = Configuration::delta(w, Site{0}, 4);
  const double t = 0.7;
  const std::size_t n = 20000;
  for (auto alg : {Algorithm::Gillespie, Algorithm::Thinning}) {
    auto law = empirical_origin(pure_death(), eta0, t, n, alg, 17);
    for (int k = 0; k <= 4; ++k) {
      const double p = binomial_survivors(4, k, t);
      const double se = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(law[k] - p) <= 3.5 * se);
    }
  }
}

TEST_CASE("runs are reproducible and logs are consistent") {
  auto model = bpdl_rates({1.0, 1.0, Kernel::box(1, 0.3, 1), Kernel::box(1, 0.2, 1)});
  auto w = Window::ball(1, 5);
  auto eta0 = Configuration::delta(w, Site{0});
  for (auto alg : {Algorithm::Gillespie, Algorithm::Thinning}) {
    RunOptions opt;
    opt.algorithm = alg;
    auto a = run(model, eta0, 2.0, 99, 4, opt);
    auto b = run(model, eta0, 2.0, 99, 4, opt);
    auto c = run(model, eta0, 2.0, 99, 5, opt);
    CHECK(a.events == b.events);
    CHECK(a.events != c.events);

    // replay: strictly increasing times, no deaths at empty sites, final state agrees
    std::vector<int> occ = eta0.dense();
    double last = 0.0;
    for (const auto& e : a.events) {
      CHECK(e.time > last);
      last = e.time;
      if (e.delta < 0) CHECK(occ[e.site] >= 1);
      CHECK((e.delta > 0) == (e.channel == Channel::Birth));
      occ[e.site] += e.delta;
    }
    CHECK(Configuration::from_dense(w, occ) == a.final_state);
  }
}

TEST_CASE("rate cache survives audits") {
  auto model = bpdl_rates({1.0, 1.0, Kernel::box(1, 0.3, 1), Kernel::box(1, 0.2, 1)});
  auto w = Window::ball(1, 5);
  RunOptions opt;
  opt.audit_every = 1;
  CHECK_NOTHROW(run(model, Configuration::delta(w, Site{0}, 3), 3.0, 5, 0, opt));
}

TEST_CASE("explosion guard reports instead of truncating") {
  auto yule = branch_local_rates({3.0, DeathCurve::linear()});
  auto w = Window::ball(1, 3);
  RunOptions opt;
  opt.max_events = 100;
  CHECK_THROWS_AS(run(yule, Configuration::delta(w, Site{0}, 5), 100.0, 1, 0, opt), ExplosionError);
}

TEST_CASE("invalid rates abort the trajectory") {
  auto bad = custom_rates(
      "nan", 0, [](const Site&, const Configuration&) { return std::nan(""); },
      [](const Site&, const Configuration&) { return 0.0; });
  auto w = Window::ball(1, 1);
  CHECK_THROWS_AS(run(bad, Configuration(w), 1.0, 1), ModelError);
}

TEST_CASE("thinning: zero rates reject and constant bounds accept") {
  auto w = Window::ball(1, 2);
  // Envelope equal to the rate: every candidate below it is accepted.
  auto immigration = bpdl_rates({0.8, 0.0, Kernel::zero(1), Kernel::zero(1)});
  ThinningEngine accept(immigration, pure_birth_envelope(immigration), w, std::vector<int>(w->size(), 0), 3, 0,
                        {.record_candidates = true});
  while (accept.advance(5.0)) accept.fire();
  REQUIRE_FALSE(accept.candidates().empty());
  for (const auto& c : accept.candidates()) CHECK(c.accepted);

  // A model whose birth rate is always zero under a positive envelope.
  auto envelope = bpdl_rates({1.0, 0.0, Kernel::zero(1), Kernel::zero(1)});
  ThinningEngine reject(frozen_rates(), envelope, w, std::vector<int>(w->size(), 0), 3, 0,
                        {.record_candidates = true});
  CHECK_FALSE(reject.advance(5.0).has_value());
  CHECK(reject.candidates_tested() > 0);
  for (const auto& c : reject.candidates()) CHECK_FALSE(c.accepted);
}

TEST_CASE("thinning detects a stale envelope") {
  auto w = Window::ball(1, 2);
  auto model = bpdl_rates({1.0, 0.0, Kernel::zero(1), Kernel::zero(1)});
  auto low = bpdl_rates({0.25, 0.0, Kernel::zero(1), Kernel::zero(1)});
  ThinningEngine e(model, low, w, std::vector<int>(w->size(), 0), 1, 0);
  CHECK_THROWS_AS(
      [&] {
        while (e.advance(100.0)) e.fire();
      }(),
      EnvelopeError);
}

TEST_CASE("thinning noise is shared between models") {
  auto w = Window::ball(1, 4);
  std::vector<int> init(w->size(), 0);
  init[4] = 1;
  auto lo = contact_rates(1.0);
  auto hi = branch_local_rates({1.0, DeathCurve::square()});
  ThinningEngine a(lo, pure_birth_envelope(lo), w, init, 21, 2, {.record_candidates = true});
  ThinningEngine b(hi, pure_birth_envelope(hi), w, init, 21, 2, {.record_candidates = true});
  while (a.advance(1.0)) a.fire();
  while (b.advance(1.0)) b.fire();
  // Any (site, channel, time) tested by both carries the same mark.
  std::map<std::tuple<std::uint32_t, int, double>, double> marks;
  for (const auto& c : b.candidates()) marks[{c.site, static_cast<int>(c.channel), c.time}] = c.mark;
  std::size_t shared = 0;
  for (const auto& c : a.candidates()) {
    auto it = marks.find({c.site, static_cast<int>(c.channel), c.time});
    if (it == marks.end()) continue;
    ++shared;
    CHECK(it->second == c.mark);
  }
  CHECK(shared > 0);
}

TEST_CASE("pure-birth envelope run dominates the model run") {
  auto model = bpdl_rates({0.5, 1.0, Kernel::box(1, 0.3, 1), Kernel::box(1, 0.2, 1)});
  auto env = pure_birth_envelope(model);
  auto w = Window::ball(1, 4);
  auto eta0 = Configuration::delta(w, Site{0});
  for (std::uint64_t r = 0; r < 50; ++r) {
    RunOptions opt;
    opt.algorithm = Algorithm::Thinning;
    auto lower = run(model, eta0, 1.0, 8, r, opt);
    auto upper = run(env, eta0, 1.0, 8, r, opt);
    CHECK(lower.final_state.dominated_by(upper.final_state));
  }
}

TEST_CASE("window convergence inside the light cone") {
  auto model = contact_rates(1.0);
  auto w = Window::ball(1, 8);
  auto eta0 = Configuration::delta(w, Site{0});
  auto one = window_convergence(model, eta0, 1.0, {4}, 3, 200);
  REQUIRE(one.size() == 1);
  CHECK_FALSE(one[0].tv_to_previous.has_value());

  // over a tiny horizon runs rarely reach the boundary of radius 6 from radius 4, so the laws agree
  auto rows = window_convergence(model, eta0, 0.05, {4, 6}, 3, 500);
  REQUIRE(rows.size() == 2);
  CHECK(*rows[1].tv_to_previous == 0.0);
}

TEST_CASE("embedding checks support") {
  auto small = Window::ball(1, 2), big = Window::ball(1, 5);
  auto eta = Configuration::delta(big, Site{4});
  CHECK_THROWS_AS(embed(eta, small), ConfigError);
  auto back = embed(embed(Configuration::delta(small, Site{1}, 2), big), small);
  CHECK(back == Configuration::delta(small, Site{1}, 2));
}
