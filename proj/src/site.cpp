#include "bdlat/site.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>

#include "bdlat/errors.hpp"

namespace bdlat {

long Site::norm1() const {
  long s = 0;
  for (int c : coords_) s += std::labs(c);
  return s;
}

Site Site::operator-() const {
  std::vector<int> out(coords_.size());
  std::transform(coords_.begin(), coords_.end(), out.begin(), std::negate<>{});
  return Site(std::move(out));
}

namespace {
void require_same_dim(const Site& x, const Site& y) {
  if (x.dim() != y.dim())
    throw ConfigError("dimension mismatch: " + x.str() + " vs " + y.str());
}
}  // namespace

Site operator+(const Site& x, const Site& y) {
  require_same_dim(x, y);
  std::vector<int> out(x.coords_.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = x.coords_[j] + y.coords_[j];
  return Site(std::move(out));
}

Site operator-(const Site& x, const Site& y) {
  require_same_dim(x, y);
  std::vector<int> out(x.coords_.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = x.coords_[j] - y.coords_[j];
  return Site(std::move(out));
}

std::string Site::str() const {
  std::string s = "(";
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    if (j) s += ",";
    s += std::to_string(coords_[j]);
  }
  return s + ")";
}

std::size_t SiteHash::operator()(const Site& x) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int c : x.coords()) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

long l1_distance(const Site& x, const Site& y) {
  require_same_dim(x, y);
  long s = 0;
  for (int j = 0; j < x.dim(); ++j) s += std::labs(static_cast<long>(x[j]) - y[j]);
  return s;
}

namespace {
void enumerate_ball(int dim, int remaining, std::vector<int>& prefix, std::vector<Site>& out) {
  if (static_cast<int>(prefix.size()) == dim) {
    out.emplace_back(prefix);
    return;
  }
  for (int c = -remaining; c <= remaining; ++c) {
    prefix.push_back(c);
    enumerate_ball(dim, remaining - std::abs(c), prefix, out);
    prefix.pop_back();
  }
}
}  // namespace

std::vector<Site> l1_ball(int dim, int radius) {
  if (dim < 1) throw ConfigError("lattice dimension must be >= 1");
  if (radius < 0) throw ConfigError("ball radius must be >= 0");
  std::vector<Site> out;
  out.reserve(l1_ball_size(dim, radius));
  std::vector<int> prefix;
  enumerate_ball(dim, radius, prefix, out);
  return out;  // generated in lexicographic order
}

std::uint64_t l1_ball_size(int dim, int radius) {
  auto binom = [](int n, int k) {
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
  };
  std::uint64_t total = 0;
  for (int k = 0; k <= std::min(dim, radius); ++k) total += (std::uint64_t{1} << k) * binom(dim, k) * binom(radius, k);
  return total;
}

}  // namespace bdlat
