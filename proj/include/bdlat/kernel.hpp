#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bdlat/configuration.hpp"
#include "bdlat/site.hpp"

namespace bdlat {

using SiteFunction = std::function<double(const Site&)>;

/// Non-negative kernel with finite support, stored as (offset, value) pairs.
class Kernel {
 public:
  Kernel() = default;
  Kernel(int dim, std::vector<std::pair<Site, double>> support);

  /// c * I{|z|_1 <= k}
  static Kernel box(int dim, double c, int k);
  /// c * I{z = 0}
  static Kernel point(int dim, double c);
  static Kernel zero(int dim) { return Kernel(dim, {}); }

  int dim() const { return dim_; }
  const std::vector<std::pair<Site, double>>& support() const { return support_; }
  double operator()(const Site& z) const;
  /// Smallest R with a(z) = 0 for |z|_1 > R; -1 for the zero kernel.
  int range() const;
  bool is_even() const;
  double mass() const;

  Kernel scaled(double s) const;
  friend Kernel operator+(const Kernel& a, const Kernel& b);

  SiteFunction as_function() const;

 private:
  int dim_ = 1;
  std::vector<std::pair<Site, double>> support_;  // sorted by offset, values > 0
};

enum class KernelFamily { ExpExp, ExpIndicator, Polynomial, Custom };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& tag);

struct KernelParams {
  double q = 0.0;
  double p = 0.0;
  double c = 0.0;
  int k = 0;
};

/// Weight w and interaction kernel a together with the validated constant
/// C_{w,a} of sum_y w(y) a(x-y) <= C_{w,a} w(x).
struct KernelPair {
  KernelFamily family = KernelFamily::Custom;
  KernelParams params;
  int dim = 1;
  SiteFunction w;
  SiteFunction a;
  int kernel_radius = 0;     // inner sums run over |x - y|_1 <= kernel_radius
  double tail_bound = 0.0;   // bound on the mass dropped by that truncation
  int ball_radius = 0;       // validation ball
  double c_wa = 0.0;
  Site worst_site;
};

struct KernelValidation {
  double c_wa = 0.0;
  Site worst_site;
  /// Largest ratio on each shell |x|_1 = k, k = 0..ball_radius.
  std::vector<double> shell_max;
};

/// Exhaustive maximization of sum_y w(y) a(x-y) / w(x) over |x|_1 <= ball_radius,
/// with the inner sum over |x-y|_1 <= kernel_radius. Checks evenness exactly on
/// the ball. Throws ValidationError when evenness fails, when w vanishes where
/// the numerator does not, or when the shell maxima keep growing toward the
/// ball boundary (the inequality cannot hold with a finite constant).
KernelValidation validate_kernel(const SiteFunction& w, const SiteFunction& a, int dim, int ball_radius,
                                 int kernel_radius);

/// Built-in (w, a) families:
///   ExpExp        w = e^{-q|x|},      a = c e^{-p|x|},        p > q > 0, c > 0
///   ExpIndicator  w = e^{-q|x|},      a = c I{|x| <= k},      q > 0, c > 0, k >= 1
///   Polynomial    w = 1/(1+|x|^q),    a = c/(1+|x|^p),        p > q > d, c > 0
/// Throws ConfigError naming the violated constraint.
KernelPair make_kernel(KernelFamily family, const KernelParams& params, int dim, int ball_radius = 50);

/// Custom pair; a must vanish beyond kernel_radius.
KernelPair make_custom_kernel(SiteFunction w, SiteFunction a, int dim, int kernel_radius, int ball_radius = 50);

/// sum_x w(x) eta(x)
double weighted_norm(const Configuration& eta, const SiteFunction& w);

}  // namespace bdlat
