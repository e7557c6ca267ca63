#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "bdlat/site.hpp"

namespace bdlat {

/// Finite set of active lattice sites. Everything outside is frozen at zero:
/// it carries no particles and hosts no events.
///
/// Windows are normally l1 balls (the truncation used to approximate the
/// infinite lattice). Explicit site lists exist for tiny verification
/// instances such as a two-site chain.
class Window {
 public:
  static std::shared_ptr<const Window> ball(int dim, int radius);
  static std::shared_ptr<const Window> from_sites(std::vector<Site> sites);

  int dim() const { return dim_; }
  /// Ball radius, or nullopt for an explicit site list.
  std::optional<int> radius() const { return radius_; }
  std::size_t size() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }
  const Site& site(std::size_t i) const { return sites_[i]; }

  std::optional<std::size_t> index_of(const Site& x) const;
  bool contains(const Site& x) const { return index_.contains(x); }

  /// Indices j with |site(j) - site(i)|_1 <= r, ascending.
  std::vector<std::size_t> within(std::size_t i, int r) const;
  /// Largest |x|_1 over the window.
  long extent() const;

  bool operator==(const Window& other) const { return sites_ == other.sites_; }

 private:
  Window(int dim, std::optional<int> radius, std::vector<Site> sites);

  int dim_;
  std::optional<int> radius_;
  std::vector<Site> sites_;
  std::unordered_map<Site, std::size_t, SiteHash> index_;
};

using WindowPtr = std::shared_ptr<const Window>;

}  // namespace bdlat
