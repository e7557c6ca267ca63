#include "doctest.h"

#include <cmath>
#include <random>

#include "bdlat/analysis.hpp"
#include "bdlat/oracle.hpp"

using namespace bdlat;
using namespace bdlat::oracle;

namespace {

ModelPtr birth_death(double b0) { return bpdl_rates({b0, 1.0, Kernel::zero(1), Kernel::zero(1)}); }

}  // namespace

TEST_CASE("state space indexing round-trips") {
  CappedStateSpace space(Window::from_sites({Site{0}, Site{1}, Site{2}}), 4);
  CHECK(space.size() == 125);
  for (std::size_t k = 0; k < space.size(); ++k) CHECK(space.index(space.state(k)) == k);
  CHECK_THROWS_AS(CappedStateSpace(Window::ball(1, 2), 2), ConfigError);
  CHECK_THROWS_AS(CappedStateSpace(Window::from_sites({Site{0}}), 7), ConfigError);
  CHECK_THROWS_AS(space.index({0, 5, 0}), ConfigError);
}

TEST_CASE("generator examples") {
  auto one = Window::from_sites({Site{0}});
  CHECK(build_generator(CappedStateSpace(one, 3), *frozen_rates()).isZero());

  auto Q = build_generator(CappedStateSpace(one, 2), *bpdl_rates({0.0, 1.0, Kernel::zero(1), Kernel::zero(1)}));
  CHECK(Q(1, 0) == 1.0);
  CHECK(Q(2, 1) == 2.0);
  CHECK(Q(0, 1) == 0.0);
  CHECK(Q(1, 2) == 0.0);
  CHECK(Q(0, 2) == 0.0);
  CHECK(Q(2, 0) == 0.0);

  auto Q5 = build_generator(CappedStateSpace(one, 5), *birth_death(1.0));
  for (int n = 0; n <= 5; ++n) {
    if (n < 5) CHECK(Q5(n, n + 1) == 1.0);
    if (n > 0) CHECK(Q5(n, n - 1) == n);
  }
  CHECK(Q5(5, 5) == -5.0);  // birth at the cap suppressed
}

TEST_CASE("generator structure on a two-site space") {
  auto w = Window::from_sites({Site{0}, Site{1}});
  CappedStateSpace space(w, 5);
  auto Q = build_generator(space, *bpdl_rates({1.0, 1.0, Kernel::point(1, 0.3), Kernel::point(1, 0.2)}));
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    CHECK(std::abs(Q.row(i).sum()) <= 1e-12);
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      if (i == j || Q(i, j) == 0.0) continue;
      CHECK(Q(i, j) > 0.0);
      auto a = space.state(static_cast<std::size_t>(i)), b = space.state(static_cast<std::size_t>(j));
      CHECK(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) == 1);
    }
  }
}

TEST_CASE("transient law") {
  auto one = Window::from_sites({Site{0}});
  CappedStateSpace space(one, 6);
  auto Q = build_generator(space, *birth_death(1.0));
  auto pi0 = point_mass(space, 0);
  CHECK(transient<double>(Q, pi0, 0.0) == pi0);
  Matrix<double> Z = Matrix<double>::Zero(7, 7);
  CHECK(transient<double>(Z, pi0, 3.0) == pi0);

  auto pi = transient<double>(Q, pi0, 5.0);
  CHECK(std::abs(pi.sum() - 1.0) <= 1e-10);
  CHECK(pi.minCoeff() >= 0.0);
  // From 0 the uncapped chain is Poisson(1 - e^{-t}) at time t, so the
  // distance to Poisson(1) is of order e^{-5}, about 2.5e-3 here.
  auto poisson = [](double mu) {
    std::vector<double> p(7);
    double norm = 0.0;
    for (int k = 0; k <= 6; ++k) norm += p[k] = std::pow(mu, k) / std::tgamma(k + 1.0);
    for (auto& x : p) x /= norm;
    return p;
  };
  double tv_limit = 0.0, tv_exact = 0.0;
  const auto limit = poisson(1.0), exact = poisson(1.0 - std::exp(-5.0));
  for (int k = 0; k <= 6; ++k) {
    tv_limit += 0.5 * std::abs(pi(k) - limit[k]);
    tv_exact += 0.5 * std::abs(pi(k) - exact[k]);
  }
  CHECK(tv_limit <= std::exp(-5.0));
  CHECK(tv_exact < 2e-4);

  // pure death: binomial survivors
  auto Qd = build_generator(space, *bpdl_rates({0.0, 1.0, Kernel::zero(1), Kernel::zero(1)}));
  auto pd = transient<double>(Qd, point_mass(space, 3), 0.4);
  const double p = std::exp(-0.4);
  CHECK(pd(3) == doctest::Approx(p * p * p).epsilon(1e-10));
  CHECK(pd(0) == doctest::Approx(std::pow(1 - p, 3)).epsilon(1e-10));

  // long horizons are split into steps
  auto far = transient<double>(Q, pi0, 200.0);
  CHECK(std::abs(far.sum() - 1.0) <= 1e-10);
}

TEST_CASE("stationary law") {
  auto one = Window::from_sites({Site{0}});
  CappedStateSpace space(one, 6);
  auto res = stationary(build_generator(space, *birth_death(1.0)));
  REQUIRE(res.unique);
  double norm = 0.0;
  for (int k = 0; k <= 6; ++k) norm += 1.0 / std::tgamma(k + 1.0);
  CHECK(std::abs(res.pi(0) - std::exp(-1.0) / (std::exp(-1.0) * norm)) <= 1e-10);
  // detailed balance product formula for b(n) = 0.7 + 0.2 n, d(n) = n (capped at 6)
  auto lin = bpdl_rates({0.7, 1.0, Kernel::point(1, 0.2), Kernel::zero(1)});
  auto r2 = stationary(build_generator(space, *lin));
  REQUIRE(r2.unique);
  std::vector<double> w(7, 1.0);
  for (int n = 1; n <= 6; ++n) w[n] = w[n - 1] * (0.7 + 0.2 * (n - 1)) / n;
  double z = 0.0;
  for (double x : w) z += x;
  for (int n = 0; n <= 6; ++n) CHECK(std::abs(r2.pi(n) - w[n] / z) <= 1e-10);

  auto frozen = stationary(build_generator(space, *frozen_rates()));
  CHECK_FALSE(frozen.unique);
  CHECK(frozen.classes.size() == 7);
  CHECK_FALSE(frozen.report.empty());

  auto contact = stationary(build_generator(CappedStateSpace(one, 1), *contact_rates(2.0)));
  REQUIRE(contact.unique);
  CHECK(contact.pi(0) == 1.0);
  CHECK(contact.pi(1) == 0.0);
}

TEST_CASE("long double oracle agrees with double") {
  auto w = Window::from_sites({Site{0}, Site{1}});
  CappedStateSpace space(w, 3);
  auto model = bpdl_rates({1.0, 1.0, Kernel::point(1, 0.3), Kernel::point(1, 0.2)});
  auto Qd = build_generator<double>(space, *model);
  auto Ql = build_generator<long double>(space, *model);
  auto pd = transient<double>(Qd, point_mass<double>(space, 0), 1.0);
  auto pl = transient<long double>(Ql, point_mass<long double>(space, 0), 1.0);
  for (Eigen::Index i = 0; i < pd.cols(); ++i) CHECK(std::abs(pd(i) - static_cast<double>(pl(i))) <= 1e-12);
}

TEST_CASE("generator rows match eval_generator on interior states") {
  auto w = Window::from_sites({Site{0}, Site{1}});
  CappedStateSpace space(w, 4);
  auto model = bpdl_rates({1.0, 1.0, Kernel::point(1, 0.3), Kernel::point(1, 0.2)});
  auto Q = build_generator(space, *model);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd f(static_cast<Eigen::Index>(space.size()));
  for (auto& x : f) x = u(rng);
  const int cap = space.cap();
  CylindricalFunction F{"table", {Site{0}, Site{1}},
                        [&](std::span<const int> s) {
                          if (s[0] > cap || s[1] > cap) return 0.0;
                          return f(static_cast<Eigen::Index>(space.index({s[0], s[1]})));
                        },
                        2.0};
  Eigen::VectorXd Qf = Q * f;
  for (std::size_t k = 0; k < space.size(); ++k) {
    auto s = space.state(k);
    if (s[0] == cap || s[1] == cap) continue;
    CHECK(std::abs(eval_generator(F, space.configuration(k), *model) - Qf(static_cast<Eigen::Index>(k))) <= 1e-12);
  }
}
