#include "doctest.h"

#include <cmath>
#include <random>

#include "bdlat/errors.hpp"
#include "bdlat/random.hpp"
#include "bdlat/rates.hpp"

using namespace bdlat;

namespace {

Configuration random_config(const WindowPtr& w, std::mt19937& rng, int max_n) {
  std::uniform_int_distribution<int> n(0, max_n);
  std::vector<int> occ(w->size());
  for (auto& x : occ) x = n(rng);
  return Configuration::from_dense(w, occ);
}

double kernel_sum(const Kernel& a, const Site& x, const Configuration& eta) {
  double s = 0.0;
  for (const auto& [y, n] : eta.counts()) s += a(x - y) * n;
  return s;
}

}  // namespace

TEST_CASE("bpdl rates match the formula") {
  BPDLParams p{0.7, 1.3, Kernel::box(1, 0.2, 2), Kernel::box(1, 0.1, 1)};
  auto model = bpdl_rates(p);
  auto w = Window::ball(1, 6);
  std::mt19937 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto eta = random_config(w, rng, 4);
    for (const auto& x : w->sites()) {
      CHECK(model->birth(x, eta) == doctest::Approx(0.7 + kernel_sum(p.a_plus, x, eta)));
      CHECK(model->death(x, eta) == doctest::Approx(eta(x) * (1.3 + kernel_sum(p.a_minus, x, eta))));
    }
  }
  CHECK(model->interaction_radius() == 2);
}

TEST_CASE("contact and branch-local rates") {
  auto w = Window::ball(1, 3);
  auto eta = Configuration::from_dense(w, std::vector<int>{0, 1, 0, 1, 1, 0, 0});  // sites -3..3
  auto contact = contact_rates(2.0);
  CHECK(contact->birth(Site{-1}, eta) == 4.0);  // neighbours -2 and 0
  CHECK(contact->birth(Site{0}, eta) == 0.0);   // occupied
  CHECK(contact->death(Site{0}, eta) == 1.0);
  CHECK(contact->death(Site{-1}, eta) == 0.0);
  CHECK(contact->occupancy_bound() == 1);

  auto bl = branch_local_rates({1.5, DeathCurve::square()});
  auto two = Configuration::from_dense(w, std::vector<int>{0, 0, 0, 3, 1, 0, 0});
  CHECK(bl->birth(Site{0}, two) == doctest::Approx(1.5 * 4));
  CHECK(bl->birth(Site{2}, two) == doctest::Approx(1.5 * 1));
  CHECK(bl->death(Site{0}, two) == 9.0);
  CHECK(bl->death(Site{1}, two) == 1.0);

  auto zero = branch_local_rates({0.0, DeathCurve::linear()});
  CHECK(zero->birth(Site{0}, two) == 0.0);
  CHECK(zero->death(Site{0}, two) == 3.0);
}

TEST_CASE("aggregation rates") {
  AggregationParams p;
  p.c = 0.5;
  p.phi = Kernel::box(1, 1.0, 1);
  auto model = aggregation_rates(p);
  auto w = Window::ball(1, 2);
  auto eta = Configuration::from_dense(w, std::vector<int>{0, 2, 1, 0, 0});
  CHECK(model->birth(Site{0}, eta) == 0.5);
  CHECK(model->death(Site{0}, eta) == doctest::Approx(std::exp(-0.5 * 3)));
  CHECK(model->death(Site{1}, eta) == 0.0);

  p.death_form = AggregationDeath::Reciprocal;
  auto recip = aggregation_rates(p);
  CHECK(recip->death(Site{-1}, eta) == doctest::Approx(1.0 / (1.0 + 0.5 * 3)));
}

TEST_CASE("capped and frozen models") {
  auto w = Window::ball(1, 1);
  auto base = bpdl_rates({1.0, 1.0, Kernel::zero(1), Kernel::zero(1)});
  auto cap = capped(base, 2);
  auto at_cap = Configuration::delta(w, Site{0}, 2);
  CHECK(cap->birth(Site{0}, at_cap) == 0.0);
  CHECK(cap->birth(Site{1}, at_cap) == 1.0);
  CHECK(cap->death(Site{0}, at_cap) == 2.0);
  CHECK(cap->occupancy_bound() == 2);

  auto frozen = frozen_rates();
  CHECK(frozen->birth(Site{0}, at_cap) == 0.0);
  CHECK(frozen->death(Site{0}, at_cap) == 0.0);
}

TEST_CASE("pure-birth envelope dominates and agrees with brute force") {
  auto w = Window::ball(1, 4);
  std::mt19937 rng(5);
  // Closed forms against the brute-force supremum of a custom copy of the same rates.
  std::vector<ModelPtr> models = {
      bpdl_rates({0.5, 1.0, Kernel::box(1, 0.3, 1), Kernel::box(1, 0.2, 1)}),
      contact_rates(1.5),
      branch_local_rates({2.0, DeathCurve::square()}),
  };
  for (const auto& m : models) {
    auto env = pure_birth_envelope(m);
    auto copy = custom_rates(
        "copy", m->interaction_radius(), [m](const Site& x, const Configuration& e) { return m->birth(x, e); },
        [m](const Site& x, const Configuration& e) { return m->death(x, e); });
    auto brute = pure_birth_envelope(copy);
    for (int trial = 0; trial < 10; ++trial) {
      auto eta = random_config(w, rng, m->occupancy_bound().value_or(3));
      for (const auto& x : w->sites()) {
        CHECK(env->death(x, eta) == 0.0);
        CHECK(env->birth(x, eta) >= m->birth(x, eta));
        CHECK(env->birth(x, eta) == doctest::Approx(brute->birth(x, eta)));
      }
    }
  }
}

TEST_CASE("envelope refuses oversized neighbourhoods") {
  auto m = custom_rates(
      "wide", 3, [](const Site&, const Configuration& e) { return static_cast<double>(e.total_mass()); },
      [](const Site&, const Configuration&) { return 0.0; });
  auto env = pure_birth_envelope(m, 16);
  auto w = Window::ball(1, 5);
  auto eta = Configuration::from_dense(w, std::vector<int>(w->size(), 3));
  CHECK_THROWS_AS(env->birth(Site{0}, eta), ConfigError);
}

TEST_CASE("death curve constraints") {
  CHECK_NOTHROW(validate_death_curve(DeathCurve::square()));
  CHECK_NOTHROW(validate_death_curve(DeathCurve::linear()));
  CHECK_THROWS_AS(validate_death_curve({"half", [](int n) { return 0.5 * n; }}), ConfigError);
  CHECK_THROWS_AS(validate_death_curve({"shift", [](int n) { return n + 1.0; }}), ConfigError);
}

TEST_CASE("batched evaluation flags invalid rates") {
  auto w = Window::ball(1, 2);
  auto bad = custom_rates(
      "bad", 0, [](const Site&, const Configuration&) { return -1.0; },
      [](const Site&, const Configuration&) { return 0.0; });
  auto rates = bad->bind(w);
  std::vector<int> occ(w->size(), 0);
  std::vector<std::size_t> all = {0, 1, 2, 3, 4};
  std::vector<double> b(5), d(5), t(5);
  CHECK_FALSE(rates->evaluate(all, occ, b.data(), d.data(), t.data()));

  auto good = bpdl_rates({1.0, 1.0, Kernel::box(1, 0.1, 1), Kernel::zero(1)})->bind(w);
  occ = {1, 0, 2, 0, 1};
  CHECK(good->evaluate(all, occ, b.data(), d.data(), t.data()));
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(b[j] == good->birth(j, occ));
    CHECK(d[j] == good->death(j, occ));
    CHECK(t[j] == b[j] + d[j]);
  }
  // dependents of the centre: radius-1 neighbourhood
  CHECK(good->dependents(2).size() == 3);
}

TEST_CASE("dominating kernels bound rate differences") {
  BPDLParams p{0.5, 1.0, Kernel::box(1, 0.3, 1), Kernel::box(1, 0.2, 1)};
  auto m = bpdl_rates(p);
  const int limit = 5;
  auto a = m->dominating_kernel(1, limit);
  REQUIRE(a.has_value());
  auto w = Window::ball(1, 4);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> n(0, limit);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> lo(w->size()), hi(w->size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] = n(rng);
      hi[i] = std::uniform_int_distribution<int>(lo[i], limit)(rng);
    }
    auto eta = Configuration::from_dense(w, lo), xi = Configuration::from_dense(w, hi);
    for (const auto& x : w->sites()) {
      if (xi(x) < eta(x)) continue;
      double diff = 0.0;
      for (const auto& y : w->sites()) diff += (*a)(x - y) * std::abs(xi(y) - eta(y));
      CHECK(m->birth(x, xi) - m->birth(x, eta) <= diff + 1e-12);
      CHECK(m->death(x, xi) - m->death(x, eta) >= -diff - 1e-12);
    }
  }
}
