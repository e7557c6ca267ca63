#include "bdlat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "bdlat/parallel.hpp"

namespace bdlat {

//--- cylindrical functions -------------------------------------------------//

int CylindricalFunction::support_radius() const {
  long r = 0;
  for (const Site& s : support) r = std::max(r, s.norm1());
  return static_cast<int>(r);
}

double CylindricalFunction::operator()(const Configuration& eta) const {
  std::vector<int> vals(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) vals[k] = eta(support[k]);
  return f(vals);
}

CylindricalFunction CylindricalFunction::constant(int dim, double c) {
  return {"constant", {Site::origin(dim)}, [c](std::span<const int>) { return c; }, 0.0};
}

CylindricalFunction CylindricalFunction::truncated_count(const Site& x, int cap) {
  return {"min(eta(" + x.str() + ")," + std::to_string(cap) + ")",
          {x},
          [cap](std::span<const int> v) { return static_cast<double>(std::min(v[0], cap)); },
          1.0};
}

CylindricalFunction CylindricalFunction::linear(std::vector<Site> sites, std::vector<double> coeffs,
                                                std::string name) {
  if (sites.size() != coeffs.size()) throw ConfigError("linear function: sites and coefficients differ in length");
  double bound = 0.0;
  for (double c : coeffs) bound = std::max(bound, std::abs(c));
  return {std::move(name), std::move(sites),
          [coeffs](std::span<const int> v) {
            double s = 0.0;
            for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * v[k];
            return s;
          },
          bound};
}

CylindricalFunction CylindricalFunction::weighted_mass(const Window& window, const SiteFunction& v) {
  std::vector<double> coeffs;
  coeffs.reserve(window.size());
  for (const Site& x : window.sites()) coeffs.push_back(v(x));
  return linear(window.sites(), std::move(coeffs), "V");
}

std::vector<long> support_indices(const CylindricalFunction& F, const Window& window) {
  std::set<Site> seen;
  std::vector<long> out;
  out.reserve(F.support.size());
  for (const Site& s : F.support) {
    if (!seen.insert(s).second) throw ConfigError("cylindrical function lists site " + s.str() + " twice");
    if (s.dim() != window.dim()) throw ConfigError("cylindrical function dimension differs from the window");
    auto i = window.index_of(s);
    out.push_back(i ? static_cast<long>(*i) : -1L);
  }
  return out;
}

double eval_generator(const CylindricalFunction& F, std::span<const long> support_index, std::span<const int> occ,
                      const SiteRates& rates) {
  const std::size_t k = F.support.size();
  std::vector<int> vals(k);
  for (std::size_t j = 0; j < k; ++j) vals[j] = support_index[j] >= 0 ? occ[static_cast<std::size_t>(support_index[j])] : 0;
  const double f0 = F.f(vals);
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (support_index[j] < 0) continue;  // frozen site: no events
    const auto i = static_cast<std::size_t>(support_index[j]);
    const double b = rates.birth(i, occ);
    const double d = rates.death(i, occ);
    if (b != 0.0) {
      ++vals[j];
      sum += b * (F.f(vals) - f0);
      --vals[j];
    }
    if (d != 0.0) {
      --vals[j];
      sum += d * (F.f(vals) - f0);
      ++vals[j];
    }
  }
  return sum;
}

double eval_generator(const CylindricalFunction& F, const Configuration& eta, const RateModel& model) {
  auto rates = model.bind(eta.window_ptr());
  const auto idx = support_indices(F, eta.window());
  const auto occ = eta.dense();
  return eval_generator(F, idx, occ, *rates);
}

//--- martingale residual ---------------------------------------------------//

ResidualEstimate martingale_residual(const CylindricalFunction& F, const ModelPtr& model, const Configuration& eta0,
                                     double t, std::size_t replicates, std::uint64_t seed, unsigned workers,
                                     Algorithm algorithm) {
  if (!(t >= 0.0)) throw ConfigError("martingale_residual: t must be >= 0");
  const auto& window = eta0.window_ptr();
  const auto rates = model->bind(window);  // read-only, shared by all workers
  const auto idx = support_indices(F, *window);
  const auto start = eta0.dense();
  const double f_start = F(eta0);

  struct Integrator {
    const CylindricalFunction& F;
    std::span<const long> idx;
    const SiteRates& rates;
    std::vector<double> pieces;
    void segment(double t0, double t1, std::span<const int> occ) {
      pieces.push_back(eval_generator(F, idx, occ, rates) * (t1 - t0));
    }
  };

  auto values = map_replicates(replicates, workers, [&](std::size_t r) {
    Integrator acc{F, idx, *rates, {}};
    Configuration end(window);
    if (algorithm == Algorithm::Gillespie) {
      GillespieEngine engine(model, window, start, seed, r);
      simulate(engine, t, acc);
      end = Configuration::from_dense(window, engine.occupancy());
    } else {
      ThinningEngine engine(model, nullptr, window, start, seed, r);
      simulate(engine, t, acc);
      end = Configuration::from_dense(window, engine.occupancy());
    }
    return F(end) - f_start - pairwise_sum(acc.pieces);
  });
  const MeanEstimate m = mean_estimate(values);
  return {m.mean, m.std_error, replicates};
}

//--- drift -----------------------------------------------------------------//

SiteFunction polynomial_lyapunov_weight(int dim) {
  return [dim](const Site& x) { return 1.0 / (1.0 + std::pow(static_cast<double>(x.norm1()), dim + 1)); };
}

namespace {

std::vector<double> default_c2_grid() {
  std::vector<double> g;
  for (double c = 0.01; c <= 20.0; c *= 1.05) g.push_back(c);
  return g;
}

}  // namespace

DriftReport drift_check(const LyapunovSpec& spec, const ModelPtr& model, std::span<const Configuration> sample,
                        std::vector<double> c2_grid) {
  DriftReport rep;
  if (sample.empty()) return rep;
  const WindowPtr& window = sample.front().window_ptr();
  const auto rates = model->bind(window);
  const auto V = CylindricalFunction::weighted_mass(*window, spec.v);
  const auto idx = support_indices(V, *window);
  rep.samples.reserve(sample.size());
  for (const Configuration& eta : sample) {
    if (!(eta.window() == *window)) throw ConfigError("drift_check: samples must share one window");
    const auto occ = eta.dense();
    rep.samples.push_back({weighted_norm(eta, spec.v), eval_generator(V, idx, occ, *rates)});
  }

  if (spec.c1 && spec.c2) {
    rep.c1 = *spec.c1;
    rep.c2 = *spec.c2;
  } else {
    if (c2_grid.empty()) c2_grid = spec.c2 ? std::vector<double>{*spec.c2} : default_c2_grid();
    double best_ratio = std::numeric_limits<double>::infinity();
    for (double c2 : c2_grid) {
      if (!(c2 > 0.0)) continue;
      double c1 = -std::numeric_limits<double>::infinity();
      for (const auto& s : rep.samples) c1 = std::max(c1, s.LV + c2 * s.V);
      const double ratio = c1 / c2;
      if (ratio < best_ratio) {
        best_ratio = ratio;
        rep.c1 = c1;
        rep.c2 = c2;
      }
    }
    rep.fitted = true;
  }

  rep.worst_slack = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const double slack = rep.samples[i].LV - (rep.c1 - rep.c2 * rep.samples[i].V);
    if (slack > 1e-9 * std::max(1.0, std::abs(rep.c1))) ++rep.violations;
    if (slack > rep.worst_slack) {
      rep.worst_slack = slack;
      rep.worst = i;
    }
  }
  return rep;
}

double maximize_drift_excess(const SiteFunction& v, const ModelPtr& model, std::span<const Configuration> starts,
                             double c2, int max_occupancy) {
  if (starts.empty()) throw ConfigError("maximize_drift_excess needs at least one start");
  const WindowPtr& window = starts.front().window_ptr();
  const auto rates = model->bind(window);
  const std::size_t n = window->size();
  std::vector<double> vw(n);
  for (std::size_t i = 0; i < n; ++i) vw[i] = v(window->site(i));
  // V is linear, so LV = sum_x v(x) (b(x) - d(x)) and G = LV + c2 V.
  auto local = [&](std::span<const int> occ, std::size_t j) { return vw[j] * (rates->birth(j, occ) - rates->death(j, occ)); };

  double best = -std::numeric_limits<double>::infinity();
  for (const Configuration& start : starts) {
    std::vector<int> occ = start.dense();
    double g = 0.0;
    for (std::size_t j = 0; j < n; ++j) g += local(occ, j) + c2 * vw[j] * occ[j];
    for (int sweep = 0; sweep < 1000; ++sweep) {
      bool improved = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (int step : {+1, -1}) {
          while (true) {
            const int next = occ[i] + step;
            if (next < 0 || next > max_occupancy) break;
            const auto deps = rates->dependents(i);
            double before = 0.0, after = 0.0;
            for (std::size_t j : deps) before += local(occ, j);
            occ[i] = next;
            for (std::size_t j : deps) after += local(occ, j);
            const double gain = after - before + c2 * vw[i] * step;
            if (gain > 1e-13) {
              g += gain;
              improved = true;
            } else {
              occ[i] -= step;
              break;
            }
          }
        }
      }
      if (!improved) break;
    }
    // exact re-evaluation of the final point
    double exact = 0.0;
    for (std::size_t j = 0; j < n; ++j) exact += local(occ, j) + c2 * vw[j] * occ[j];
    best = std::max(best, exact);
  }
  return best;
}

double bpdl_certified_c1(const BPDLParams& p, const Window& window, const SiteFunction& v, double c_va, double c2) {
  const double a0 = p.a_minus.support().empty() ? 0.0 : p.a_minus(Site::origin(window.dim()));
  const double K = c_va + c2 - p.m;
  double per_site;
  if (a0 > 0.0) {
    const double n_star = std::max(0.0, K / (2.0 * a0));
    per_site = 0.0;
    for (double n : {std::floor(n_star), std::ceil(n_star)}) per_site = std::max(per_site, n * (K - a0 * n));
  } else if (K <= 0.0) {
    per_site = 0.0;
  } else {
    throw ConfigError("no certified drift constant: a-(0) = 0 and c_va + c2 > m");
  }
  double c1 = 0.0;
  for (const Site& x : window.sites()) c1 += v(x) * (p.b0 + per_site);
  return c1;
}

std::vector<Configuration> random_configurations(const WindowPtr& window, std::size_t count, std::uint64_t seed,
                                                 const SiteFunction& v, double max_v) {
  NoiseStream stream(seed, stream_id({0xD21F7ULL}));
  std::vector<Configuration> out;
  out.reserve(count);
  const std::size_t n = window->size();
  std::uniform_int_distribution<std::size_t> any_site(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (out.size() < count) {
    std::vector<int> occ(n, 0);
    const int mode = static_cast<int>(out.size() % 3);
    if (mode == 0) {
      const int k = std::uniform_int_distribution<int>(1, 5)(stream);
      for (int j = 0; j < k; ++j) occ[any_site(stream)] += std::uniform_int_distribution<int>(1, 30)(stream);
    } else if (mode == 1) {
      const std::size_t c = any_site(stream);
      const int radius = std::uniform_int_distribution<int>(0, 6)(stream);
      const int top = std::uniform_int_distribution<int>(1, 6)(stream);
      for (std::size_t j : window->within(c, radius)) occ[j] = std::uniform_int_distribution<int>(0, top)(stream);
    } else {
      const double p = 0.5 * unit(stream);
      for (std::size_t j = 0; j < n; ++j)
        if (unit(stream) < p) occ[j] = std::uniform_int_distribution<int>(1, 3)(stream);
    }
    auto eta = Configuration::from_dense(window, occ);
    if (weighted_norm(eta, v) <= max_v) out.push_back(std::move(eta));
  }
  return out;
}

std::vector<Configuration> single_site_stacks(const WindowPtr& window, int max_n) {
  std::vector<Configuration> out;
  for (const Site& x : window->sites())
    for (int k = 1; k <= max_n; ++k) out.push_back(Configuration::delta(window, x, k));
  return out;
}

DriftFit fit_drift_constants(const ModelPtr& model, const WindowPtr& window, const SiteFunction& v,
                             std::size_t samples, double max_v, std::uint64_t seed,
                             const std::optional<BPDLParams>& bpdl, double c_va) {
  std::vector<Configuration> fit_set = random_configurations(window, samples, seed, v, max_v);
  int max_n = 1;
  for (const auto& eta : fit_set)
    for (const auto& [x, n] : eta.counts()) max_n = std::max(max_n, n);
  for (auto& eta : single_site_stacks(window, max_n))
    if (weighted_norm(eta, v) <= max_v) fit_set.push_back(std::move(eta));

  DriftFit out;
  const DriftReport fit = drift_check({v, c_va, std::nullopt, std::nullopt}, model, fit_set);
  out.c2 = fit.c2;
  out.c1_fit = fit.c1;
  out.c1_ascent = maximize_drift_excess(v, model, fit_set, out.c2, std::max(64, 2 * max_n));
  out.c1 = std::max(out.c1_fit, out.c1_ascent);
  if (bpdl) out.c1_certified = bpdl_certified_c1(*bpdl, *window, v, c_va, out.c2);

  const auto check_set = random_configurations(window, samples, seed ^ 0x5EC0D5EEDULL, v, max_v);
  out.verification = drift_check({v, c_va, out.c1, out.c2}, model, check_set);
  return out;
}

//--- occupation measure ----------------------------------------------------//

std::vector<OccupationRow> occupation_measure(const ModelPtr& model, const WindowPtr& window, const SiteFunction& v,
                                              double c1, double c2, std::vector<double> n_grid,
                                              std::vector<double> r_grid, std::uint64_t seed, std::size_t replicates,
                                              unsigned workers) {
  if (n_grid.empty() || r_grid.empty()) throw ConfigError("occupation_measure needs n and r grids");
  std::sort(n_grid.begin(), n_grid.end());
  if (!(n_grid.front() > 0.0)) throw ConfigError("occupation horizons must be positive");
  if (!(c2 > 0.0)) throw ConfigError("occupation_measure needs c2 > 0");
  std::vector<double> vw(window->size());
  for (std::size_t i = 0; i < vw.size(); ++i) vw[i] = v(window->site(i));
  const std::size_t N = n_grid.size(), R = r_grid.size();

  struct Tracker {
    const std::vector<double>& vw;
    const std::vector<double>& n_grid;
    const std::vector<double>& r_grid;
    double V = 0.0;
    std::vector<double> inside;  // [a * R + b]: time in {V <= r_b} within [0, n_a]
    void segment(double t0, double t1, std::span<const int>) {
      for (std::size_t a = 0; a < n_grid.size(); ++a) {
        const double len = std::min(t1, n_grid[a]) - t0;
        if (len <= 0.0) continue;
        for (std::size_t b = 0; b < r_grid.size(); ++b)
          if (V <= r_grid[b]) inside[a * r_grid.size() + b] += len;
      }
    }
    void event(const EventRecord& e, std::span<const int>) { V += vw[e.site] * e.delta; }
  };

  auto fractions = map_replicates(replicates, workers, [&](std::size_t r) {
    Tracker tr{vw, n_grid, r_grid, 0.0, std::vector<double>(N * R, 0.0)};
    GillespieEngine engine(model, window, std::vector<int>(window->size(), 0), seed, r);
    simulate(engine, n_grid.back(), tr);
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < R; ++b) tr.inside[a * R + b] /= n_grid[a];
    return tr.inside;
  });

  std::vector<OccupationRow> rows;
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = 0; b < R; ++b) {
      std::vector<double> x(replicates);
      for (std::size_t r = 0; r < replicates; ++r) x[r] = fractions[r][a * R + b];
      const MeanEstimate m = mean_estimate(x);
      OccupationRow row;
      row.n = n_grid[a];
      row.r = r_grid[b];
      row.mu_hat = m.mean;
      row.std_error = m.std_error;
      row.bound = 1.0 - c1 / (c2 * r_grid[b]);
      row.ok = row.mu_hat >= row.bound - 3.0 * row.std_error;
      rows.push_back(row);
    }
  return rows;
}

}  // namespace bdlat
