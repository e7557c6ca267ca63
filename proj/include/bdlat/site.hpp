#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bdlat {

/// A point of the integer lattice Z^d.
class Site {
 public:
  Site() = default;
  explicit Site(std::vector<int> coords) : coords_(std::move(coords)) {}
  Site(std::initializer_list<int> coords) : coords_(coords) {}

  static Site origin(int dim) { return Site(std::vector<int>(static_cast<std::size_t>(dim), 0)); }

  int dim() const { return static_cast<int>(coords_.size()); }
  int operator[](std::size_t j) const { return coords_[j]; }
  std::span<const int> coords() const { return coords_; }

  /// |x|_1
  long norm1() const;

  Site operator-() const;
  friend Site operator+(const Site& x, const Site& y);
  friend Site operator-(const Site& x, const Site& y);

  friend bool operator==(const Site&, const Site&) = default;
  friend auto operator<=>(const Site& x, const Site& y) { return x.coords_ <=> y.coords_; }

  std::string str() const;

 private:
  std::vector<int> coords_;
};

struct SiteHash {
  std::size_t operator()(const Site& x) const noexcept;
};

/// Graph distance on Z^d. Throws ConfigError on dimension mismatch.
long l1_distance(const Site& x, const Site& y);

/// All sites with |x|_1 <= radius, sorted lexicographically.
std::vector<Site> l1_ball(int dim, int radius);

/// Closed-form cardinality of the l1 ball: sum_k 2^k C(d,k) C(R,k).
std::uint64_t l1_ball_size(int dim, int radius);

}  // namespace bdlat
