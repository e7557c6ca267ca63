#include "bdlat/configuration.hpp"

#include "bdlat/errors.hpp"

namespace bdlat {

Configuration::Configuration(WindowPtr window) : window_(std::move(window)) {
  if (!window_) throw ConfigError("configuration needs a window");
}

Configuration Configuration::from_dense(WindowPtr window, std::span<const int> occupancy) {
  Configuration eta(std::move(window));
  if (occupancy.size() != eta.window_->size()) throw ConfigError("dense occupancy size does not match window");
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    if (occupancy[i] < 0) throw ConfigError("negative occupancy");
    if (occupancy[i] > 0) eta.counts_.emplace(eta.window_->site(i), occupancy[i]);
  }
  return eta;
}

Configuration Configuration::delta(WindowPtr window, const Site& x, int n) {
  Configuration eta(std::move(window));
  eta.set(x, n);
  return eta;
}

int Configuration::operator()(const Site& x) const {
  auto it = counts_.find(x);
  return it == counts_.end() ? 0 : it->second;
}

Configuration& Configuration::set(const Site& x, int n) {
  if (x.dim() != window_->dim()) throw ConfigError("site " + x.str() + " has wrong dimension");
  if (n < 0) throw ConfigError("negative occupancy at " + x.str());
  if (n == 0) {
    counts_.erase(x);
    return *this;
  }
  if (!window_->contains(x)) throw ConfigError("site " + x.str() + " lies outside the window");
  counts_[x] = n;
  return *this;
}

Configuration& Configuration::add(const Site& x, int delta) { return set(x, (*this)(x) + delta); }

long Configuration::total_mass() const {
  long s = 0;
  for (const auto& [x, n] : counts_) s += n;
  return s;
}

std::vector<int> Configuration::dense() const {
  std::vector<int> occ(window_->size(), 0);
  for (const auto& [x, n] : counts_) occ[*window_->index_of(x)] = n;
  return occ;
}

bool Configuration::dominated_by(const Configuration& other) const {
  for (const auto& [x, n] : counts_)
    if (other(x) < n) return false;
  return true;
}

nlohmann::json to_json(const Configuration& eta) {
  nlohmann::json j;
  j["dim"] = eta.window().dim();
  if (auto r = eta.window().radius()) {
    j["radius"] = *r;
  } else {
    j["radius"] = nullptr;
    auto sites = nlohmann::json::array();
    for (const auto& x : eta.window().sites()) sites.push_back(std::vector<int>(x.coords().begin(), x.coords().end()));
    j["sites"] = std::move(sites);
  }
  auto counts = nlohmann::json::array();
  for (const auto& [x, n] : eta.counts())  // std::map keeps lexicographic order
    counts.push_back(nlohmann::json::array({std::vector<int>(x.coords().begin(), x.coords().end()), n}));
  j["counts"] = std::move(counts);
  return j;
}

Configuration configuration_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    WindowPtr window;
    if (j.at("radius").is_null()) {
      std::vector<Site> sites;
      for (const auto& s : j.at("sites")) sites.emplace_back(s.get<std::vector<int>>());
      window = Window::from_sites(std::move(sites));
      if (window->dim() != dim) throw ConfigError("configuration dim does not match its sites");
    } else {
      window = Window::ball(dim, j.at("radius").get<int>());
    }
    Configuration eta(window);
    for (const auto& entry : j.at("counts")) {
      if (!entry.is_array() || entry.size() != 2) throw ConfigError("counts entries must be [[coords...], n]");
      Site x(entry[0].get<std::vector<int>>());
      eta.set(x, entry[1].get<int>());
    }
    return eta;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration JSON: ") + e.what());
  }
}

}  // namespace bdlat
