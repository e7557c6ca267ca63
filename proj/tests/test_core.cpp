#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "bdlat/errors.hpp"
#include "bdlat/kernel.hpp"
#include "bdlat/parallel.hpp"
#include "bdlat/random.hpp"
#include "bdlat/stats.hpp"
#include "bdlat/window.hpp"

using namespace bdlat;

TEST_CASE("l1 ball cardinality matches enumeration") {
  for (int d = 1; d <= 3; ++d)
    for (int r = 0; r <= 6; ++r) {
      // count by brute force over the cube
      std::uint64_t n = 0;
      std::vector<int> x(static_cast<std::size_t>(d), -r);
      while (true) {
        long s = 0;
        for (int c : x) s += std::abs(c);
        if (s <= r) ++n;
        std::size_t j = 0;
        while (j < x.size() && x[j] == r) x[j++] = -r;
        if (j == x.size()) break;
        ++x[j];
      }
      CHECK(l1_ball(d, r).size() == n);
      CHECK(l1_ball_size(d, r) == n);
    }
  CHECK(l1_ball_size(1, 20) == 41);
  CHECK(l1_ball_size(2, 1) == 5);
}

TEST_CASE("site arithmetic and distance") {
  Site x{1, -2}, y{-3, 4};
  CHECK((x + y) == Site{-2, 2});
  CHECK((x - y) == Site{4, -6});
  CHECK((-x) == Site{-1, 2});
  CHECK(x.norm1() == 3);
  CHECK(l1_distance(x, y) == 10);
  CHECK_THROWS_AS(l1_distance(Site{1}, Site{1, 2}), ConfigError);
}

TEST_CASE("window lookup") {
  auto w = Window::ball(2, 3);
  CHECK(w->radius() == 3);
  for (std::size_t i = 0; i < w->size(); ++i) CHECK(w->index_of(w->site(i)) == i);
  CHECK_FALSE(w->contains(Site{2, 2}));
  CHECK(w->extent() == 3);
  auto origin = *w->index_of(Site{0, 0});
  CHECK(w->within(origin, 1).size() == 5);

  auto pair = Window::from_sites({Site{0}, Site{1}});
  CHECK_FALSE(pair->radius().has_value());
  CHECK(pair->size() == 2);
}

TEST_CASE("configuration counts and domination") {
  auto w = Window::ball(1, 2);
  Configuration a = Configuration::delta(w, Site{0});
  Configuration b = Configuration::delta(w, Site{0}, 2);
  CHECK(a(Site{0}) == 1);
  CHECK(a(Site{5}) == 0);
  CHECK(a.dominated_by(b));
  CHECK_FALSE(b.dominated_by(a));
  b.add(Site{1}, 3);
  CHECK(b.total_mass() == 5);
  b.set(Site{0}, 0);
  CHECK(b.counts().size() == 1);
  CHECK_THROWS_AS(b.set(Site{5}, 1), ConfigError);
  CHECK_THROWS_AS(b.set(Site{1}, -1), ConfigError);
  CHECK(Configuration::from_dense(w, b.dense()) == b);
  CHECK(configuration_from_json(to_json(b)) == b);
}

TEST_CASE("kernel families") {
  // w = e^{-|x|}, a = I{|x| <= 1}: sup over x of (e^{-|x-1|} + e^{-|x|} + e^{-|x+1|}) / e^{-|x|}
  auto pair = make_kernel(KernelFamily::ExpIndicator, {.q = 1.0, .c = 1.0, .k = 1}, 1);
  CHECK(std::abs(pair.c_wa - (std::numbers::e + 1.0 + 1.0 / std::numbers::e)) <= 1e-9);

  CHECK_THROWS_AS(make_kernel(KernelFamily::ExpExp, {.q = 2.0, .p = 1.0, .c = 1.0}, 1), ConfigError);
  CHECK_THROWS_AS(make_kernel(KernelFamily::Polynomial, {.q = 0.5, .p = 3.0, .c = 1.0}, 1), ConfigError);
  CHECK_NOTHROW(make_kernel(KernelFamily::ExpExp, {.q = 1.0, .p = 2.0, .c = 1.0}, 1));

  Kernel k = Kernel::box(2, 0.5, 1);
  CHECK(k.range() == 1);
  CHECK(k.is_even());
  CHECK(k.mass() == doctest::Approx(2.5));
  CHECK(Kernel::zero(1).range() == -1);
  CHECK(Kernel::point(1, 2.0)(Site{0}) == 2.0);
}

TEST_CASE("kernel validation rejects odd and growing pairs") {
  SiteFunction w = [](const Site& x) { return std::exp(-static_cast<double>(x.norm1())); };
  SiteFunction odd = [](const Site& x) { return x[0] == 1 ? 1.0 : 0.0; };
  CHECK_THROWS_AS(validate_kernel(w, odd, 1, 10, 1), ValidationError);
  // w decaying like e^{-|x|^2} against a box kernel: the ratio grows without bound
  SiteFunction fast = [](const Site& x) { return std::exp(-static_cast<double>(x.norm1() * x.norm1())); };
  SiteFunction box = [](const Site& x) { return x.norm1() <= 1 ? 1.0 : 0.0; };
  CHECK_THROWS_AS(validate_kernel(fast, box, 1, 10, 1), ValidationError);
}

TEST_CASE("philox known answers") {
  using A = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("noise streams are pure functions of their keys") {
  NoiseStream a(7, site_stream_id(Site{3}, Channel::Birth, 0, 0, 0));
  NoiseStream b(7, site_stream_id(Site{3}, Channel::Birth, 0, 0, 0));
  NoiseStream c(7, site_stream_id(Site{3}, Channel::Death, 0, 0, 0));
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(a.block(5) == b.block(5));
  CHECK(a.block(5) != c.block(5));

  std::set<std::uint64_t> ids;
  for (int x = -5; x <= 5; ++x)
    for (std::uint64_t rep = 0; rep < 4; ++rep)
      for (auto ch : {Channel::Birth, Channel::Death}) ids.insert(site_stream_id(Site{x}, ch, rep, 0, 0));
  CHECK(ids.size() == 11 * 4 * 2);

  CHECK(NoiseStream::to_unit32(0) > 0.0);
  CHECK(NoiseStream::to_unit32(0xffffffffu) < 1.0);
}

TEST_CASE("uniform moments") {
  NoiseStream s(1, 2);
  std::vector<double> u(200000);
  for (auto& x : u) x = s.uniform();
  auto m = mean_estimate(u);
  CHECK(std::abs(m.mean - 0.5) < 4 * m.std_error);
  CHECK(m.std_error == doctest::Approx(std::sqrt(1.0 / 12.0 / 200000.0)).epsilon(0.01));
}

TEST_CASE("wilson interval and tv distance") {
  auto [lo, hi] = wilson_interval(0, 100);
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.959963984540054 * 1.959963984540054 / (100 + 1.959963984540054 * 1.959963984540054)));
  auto [lo2, hi2] = wilson_interval(50, 100);
  CHECK(lo2 < 0.5);
  CHECK(hi2 > 0.5);
  CHECK(0.5 - lo2 == doctest::Approx(hi2 - 0.5));

  std::map<int, double> p{{0, 0.5}, {1, 0.5}}, q{{1, 0.25}, {2, 0.75}};
  CHECK(tv_distance(p, q) == doctest::Approx(0.75));
  CHECK(tv_distance(p, p) == 0.0);
}

TEST_CASE("pairwise sum is exact on small integers") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  CHECK(pairwise_sum(v) == 499500.0);
}

TEST_CASE("map_replicates orders results and propagates the lowest failure") {
  auto seq = map_replicates(100, 1, [](std::size_t i) { return i * i; });
  auto par = map_replicates(100, 4, [](std::size_t i) { return i * i; });
  CHECK(seq == par);
  CHECK_THROWS_WITH(map_replicates(10, 3,
                                   [](std::size_t i) -> int {
                                     if (i >= 4) throw std::runtime_error("fail " + std::to_string(i));
                                     return 0;
                                   }),
                    "fail 4");
}
