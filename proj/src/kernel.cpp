#include "bdlat/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bdlat/errors.hpp"

namespace bdlat {

Kernel::Kernel(int dim, std::vector<std::pair<Site, double>> support) : dim_(dim) {
  std::map<Site, double> merged;
  for (auto& [z, v] : support) {
    if (z.dim() != dim) throw ConfigError("kernel offset " + z.str() + " has wrong dimension");
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("kernel values must be finite and non-negative");
    merged[z] += v;
  }
  for (auto& [z, v] : merged)
    if (v > 0.0) support_.emplace_back(z, v);
}

Kernel Kernel::box(int dim, double c, int k) {
  std::vector<std::pair<Site, double>> support;
  for (auto& z : l1_ball(dim, k)) support.emplace_back(std::move(z), c);
  return Kernel(dim, std::move(support));
}

Kernel Kernel::point(int dim, double c) { return Kernel(dim, {{Site::origin(dim), c}}); }

double Kernel::operator()(const Site& z) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), z,
                             [](const auto& entry, const Site& key) { return entry.first < key; });
  return (it != support_.end() && it->first == z) ? it->second : 0.0;
}

int Kernel::range() const {
  long r = -1;
  for (const auto& [z, v] : support_) r = std::max(r, z.norm1());
  return static_cast<int>(r);
}

bool Kernel::is_even() const {
  for (const auto& [z, v] : support_)
    if ((*this)(-z) != v) return false;
  return true;
}

double Kernel::mass() const {
  double s = 0.0;
  for (const auto& [z, v] : support_) s += v;
  return s;
}

Kernel Kernel::scaled(double s) const {
  auto support = support_;
  for (auto& [z, v] : support) v *= s;
  return Kernel(dim_, std::move(support));
}

Kernel operator+(const Kernel& a, const Kernel& b) {
  if (a.dim_ != b.dim_) throw ConfigError("adding kernels of different dimension");
  auto support = a.support_;
  support.insert(support.end(), b.support_.begin(), b.support_.end());
  return Kernel(a.dim_, std::move(support));
}

SiteFunction Kernel::as_function() const {
  return [k = *this](const Site& z) { return k(z); };
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::ExpExp: return "exp-exp";
    case KernelFamily::ExpIndicator: return "exp-indicator";
    case KernelFamily::Polynomial: return "polynomial";
    case KernelFamily::Custom: return "custom";
  }
  return "custom";
}

KernelFamily kernel_family_from_string(const std::string& tag) {
  if (tag == "exp-exp") return KernelFamily::ExpExp;
  if (tag == "exp-indicator") return KernelFamily::ExpIndicator;
  if (tag == "polynomial") return KernelFamily::Polynomial;
  if (tag == "custom") return KernelFamily::Custom;
  throw ConfigError("unknown kernel family '" + tag + "'");
}

KernelValidation validate_kernel(const SiteFunction& w, const SiteFunction& a, int dim, int ball_radius,
                                 int kernel_radius) {
  const auto ball = l1_ball(dim, ball_radius);
  const auto offsets = l1_ball(dim, kernel_radius);

  for (const auto& x : ball)
    if (w(x) != w(-x)) throw ValidationError("weight w is not even at " + x.str());
  for (const auto& z : offsets)
    if (a(z) != a(-z)) throw ValidationError("kernel a is not even at " + z.str());

  std::vector<std::pair<Site, double>> a_support;
  for (const auto& z : offsets) {
    const double v = a(z);
    if (v < 0.0) throw ValidationError("kernel a is negative at " + z.str());
    if (v > 0.0) a_support.emplace_back(z, v);
  }

  KernelValidation out;
  out.shell_max.assign(static_cast<std::size_t>(ball_radius) + 1, 0.0);
  out.worst_site = Site::origin(dim);
  bool have_worst = false;
  for (const auto& x : ball) {
    double numerator = 0.0;
    for (const auto& [z, av] : a_support) numerator += w(x - z) * av;  // y = x - z
    const double wx = w(x);
    if (wx <= 0.0) {
      if (numerator > 0.0) throw ValidationError("weight vanishes at " + x.str() + " where the kernel sum does not");
      continue;
    }
    const double ratio = numerator / wx;
    auto& shell = out.shell_max[static_cast<std::size_t>(x.norm1())];
    shell = std::max(shell, ratio);
    if (!have_worst || ratio > out.c_wa) {
      out.c_wa = ratio;
      out.worst_site = x;
      have_worst = true;
    }
  }

  // Growth test on the shells at R/4, R/2, R: a convergent ratio has shrinking
  // increments, a divergent one does not.
  if (ball_radius >= 4) {
    const double r1 = out.shell_max[static_cast<std::size_t>(ball_radius / 4)];
    const double r2 = out.shell_max[static_cast<std::size_t>(ball_radius / 2)];
    const double r3 = out.shell_max[static_cast<std::size_t>(ball_radius)];
    const double late = r3 - r2;
    const double early = r2 - r1;
    if (late > 1e-9 * std::max(1.0, std::abs(r3)) && late >= early)
      throw ValidationError("kernel ratio keeps growing toward the validation boundary (" + std::to_string(r1) +
                            ", " + std::to_string(r2) + ", " + std::to_string(r3) +
                            "): sum_y w(y)a(x-y) <= C w(x) has no finite constant");
  }
  return out;
}

namespace {

double shell_size(int dim, int k) {
  if (k == 0) return 1.0;
  return static_cast<double>(l1_ball_size(dim, k) - l1_ball_size(dim, k - 1));
}

// Smallest r with sum_{k>r} shell(k) * term(k) <= tol, capped at max_r.
template <class Term>
std::pair<int, double> truncation_radius(int dim, Term term, double tol, int max_r, int horizon,
                                        double remainder) {
  // Tail summed directly up to horizon; `remainder` bounds what lies beyond.
  std::vector<double> contrib;
  contrib.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int k = 0; k <= horizon; ++k) contrib.push_back(shell_size(dim, k) * term(k));
  std::vector<double> tail(contrib.size() + 1, remainder);
  for (std::size_t k = contrib.size(); k-- > 0;) tail[k] = tail[k + 1] + contrib[k];
  for (int r = 0; r <= max_r; ++r)
    if (tail[static_cast<std::size_t>(r) + 1] <= tol) return {r, tail[static_cast<std::size_t>(r) + 1]};
  return {max_r, tail[static_cast<std::size_t>(max_r) + 1]};
}

}  // namespace

KernelPair make_kernel(KernelFamily family, const KernelParams& prm, int dim, int ball_radius) {
  if (dim < 1) throw ConfigError("lattice dimension must be >= 1");
  KernelPair kp;
  kp.family = family;
  kp.params = prm;
  kp.dim = dim;
  kp.ball_radius = ball_radius;
  constexpr double kTail = 1e-12;
  switch (family) {
    case KernelFamily::ExpExp: {
      if (!(prm.q > 0.0)) throw ConfigError("exp-exp kernel requires q > 0");
      if (!(prm.p > prm.q)) throw ConfigError("exp-exp kernel requires p > q");
      if (!(prm.c > 0.0)) throw ConfigError("exp-exp kernel requires c > 0");
      const double q = prm.q, p = prm.p, c = prm.c;
      kp.w = [q](const Site& x) { return std::exp(-q * static_cast<double>(x.norm1())); };
      kp.a = [p, c](const Site& x) { return c * std::exp(-p * static_cast<double>(x.norm1())); };
      // w(x-z)/w(x) <= e^{q|z|}, so the dropped mass is at most c sum shell(k) e^{-(p-q)k}.
      std::tie(kp.kernel_radius, kp.tail_bound) = truncation_radius(
          dim, [&](int k) { return c * std::exp(-(p - q) * k); }, kTail, 400, 4400, 0.0);
      break;
    }
    case KernelFamily::ExpIndicator: {
      if (!(prm.q > 0.0)) throw ConfigError("exp-indicator kernel requires q > 0");
      if (!(prm.c > 0.0)) throw ConfigError("exp-indicator kernel requires c > 0");
      if (prm.k < 1) throw ConfigError("exp-indicator kernel requires k in N (k >= 1)");
      const double q = prm.q, c = prm.c;
      const int k = prm.k;
      kp.w = [q](const Site& x) { return std::exp(-q * static_cast<double>(x.norm1())); };
      kp.a = [c, k](const Site& x) { return x.norm1() <= k ? c : 0.0; };
      kp.kernel_radius = k;
      kp.tail_bound = 0.0;
      break;
    }
    case KernelFamily::Polynomial: {
      if (!(prm.q > static_cast<double>(dim))) throw ConfigError("polynomial kernel requires q > d");
      if (!(prm.p > prm.q)) throw ConfigError("polynomial kernel requires p > q");
      if (!(prm.c > 0.0)) throw ConfigError("polynomial kernel requires c > 0");
      const double q = prm.q, p = prm.p, c = prm.c;
      kp.w = [q](const Site& x) { return 1.0 / (1.0 + std::pow(static_cast<double>(x.norm1()), q)); };
      kp.a = [p, c](const Site& x) { return c / (1.0 + std::pow(static_cast<double>(x.norm1()), p)); };
      // w(x-z)/w(x) <= 1 + |x|^q <= 1 + R^q on the validation ball.
      const double lift = 1.0 + std::pow(static_cast<double>(ball_radius), q);
      const int max_r = dim == 1 ? 2000 : (dim == 2 ? 120 : 30);
      const int horizon = max_r + 4000;
      // shell(k) <= 2^d k^{d-1}; sum_{k>H} k^{d-1-p} <= H^{d-p} / (p - d)
      const double remainder = lift * c * std::ldexp(1.0, dim) * std::pow(static_cast<double>(horizon), dim - p) /
                               (p - static_cast<double>(dim));
      std::tie(kp.kernel_radius, kp.tail_bound) = truncation_radius(
          dim, [&](int k) { return lift * c / (1.0 + std::pow(static_cast<double>(k), p)); }, kTail, max_r,
          horizon, remainder);
      break;
    }
    case KernelFamily::Custom:
      throw ConfigError("custom kernels are built with make_custom_kernel");
  }
  auto v = validate_kernel(kp.w, kp.a, dim, ball_radius, kp.kernel_radius);
  kp.c_wa = v.c_wa;
  kp.worst_site = v.worst_site;
  return kp;
}

KernelPair make_custom_kernel(SiteFunction w, SiteFunction a, int dim, int kernel_radius, int ball_radius) {
  if (kernel_radius < 0) throw ConfigError("custom kernels must declare a finite interaction radius");
  KernelPair kp;
  kp.family = KernelFamily::Custom;
  kp.dim = dim;
  kp.w = std::move(w);
  kp.a = std::move(a);
  kp.kernel_radius = kernel_radius;
  kp.ball_radius = ball_radius;
  auto v = validate_kernel(kp.w, kp.a, dim, ball_radius, kernel_radius);
  kp.c_wa = v.c_wa;
  kp.worst_site = v.worst_site;
  return kp;
}

double weighted_norm(const Configuration& eta, const SiteFunction& w) {
  double s = 0.0;
  for (const auto& [x, n] : eta.counts()) s += w(x) * n;
  return s;
}

}  // namespace bdlat
