#include "bdlat/window.hpp"

#include <algorithm>

#include "bdlat/errors.hpp"

namespace bdlat {

Window::Window(int dim, std::optional<int> radius, std::vector<Site> sites)
    : dim_(dim), radius_(radius), sites_(std::move(sites)) {
  index_.reserve(sites_.size());
  for (std::size_t i = 0; i < sites_.size(); ++i) index_.emplace(sites_[i], i);
}

std::shared_ptr<const Window> Window::ball(int dim, int radius) {
  auto sites = l1_ball(dim, radius);
  return std::shared_ptr<const Window>(new Window(dim, radius, std::move(sites)));
}

std::shared_ptr<const Window> Window::from_sites(std::vector<Site> sites) {
  if (sites.empty()) throw ConfigError("window needs at least one site");
  const int dim = sites.front().dim();
  if (dim < 1) throw ConfigError("lattice dimension must be >= 1");
  for (const auto& x : sites)
    if (x.dim() != dim) throw ConfigError("window sites have mixed dimensions");
  std::sort(sites.begin(), sites.end());
  if (std::adjacent_find(sites.begin(), sites.end()) != sites.end())
    throw ConfigError("window sites must be distinct");
  return std::shared_ptr<const Window>(new Window(dim, std::nullopt, std::move(sites)));
}

std::optional<std::size_t> Window::index_of(const Site& x) const {
  auto it = index_.find(x);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Window::within(std::size_t i, int r) const {
  std::vector<std::size_t> out;
  const Site& x = sites_[i];
  if (sites_.size() <= l1_ball_size(dim_, r)) {
    for (std::size_t j = 0; j < sites_.size(); ++j)
      if (l1_distance(x, sites_[j]) <= r) out.push_back(j);
    return out;
  }
  for (const auto& z : l1_ball(dim_, r)) {
    if (auto j = index_of(x + z)) out.push_back(*j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

long Window::extent() const {
  long e = 0;
  for (const auto& x : sites_) e = std::max(e, x.norm1());
  return e;
}

}  // namespace bdlat
