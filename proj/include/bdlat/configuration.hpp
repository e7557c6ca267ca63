#pragma once

#include <map>
#include <span>
#include <vector>

#include "bdlat/window.hpp"
#include "json.hpp"

namespace bdlat {

/// Occupancy counts on a window. Only sites with a positive count are stored.
class Configuration {
 public:
  explicit Configuration(WindowPtr window);

  static Configuration from_dense(WindowPtr window, std::span<const int> occupancy);
  static Configuration delta(WindowPtr window, const Site& x, int n = 1);

  const Window& window() const { return *window_; }
  const WindowPtr& window_ptr() const { return window_; }

  /// eta(x); zero for empty sites and for sites outside the window.
  int operator()(const Site& x) const;

  /// Sets eta(x) = n. Throws ConfigError for n < 0 or a positive count
  /// outside the window.
  Configuration& set(const Site& x, int n);
  Configuration& add(const Site& x, int delta);

  const std::map<Site, int>& counts() const { return counts_; }
  bool empty() const { return counts_.empty(); }
  long total_mass() const;

  /// Occupancy indexed like window().sites().
  std::vector<int> dense() const;

  /// Pointwise eta <= other.
  bool dominated_by(const Configuration& other) const;

  bool operator==(const Configuration& other) const {
    return *window_ == *other.window_ && counts_ == other.counts_;
  }

 private:
  WindowPtr window_;
  std::map<Site, int> counts_;
};

/// {"dim": d, "radius": R, "counts": [[[coords...], n], ...]}; explicit-site
/// windows carry "radius": null plus a "sites" list.
nlohmann::json to_json(const Configuration& eta);
Configuration configuration_from_json(const nlohmann::json& j);

}  // namespace bdlat
