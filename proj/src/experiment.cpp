#include "bdlat/experiment.hpp"

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "bdlat/analysis.hpp"
#include "bdlat/coupling.hpp"
#include "bdlat/io.hpp"
#include "bdlat/kernel.hpp"
#include "bdlat/oracle.hpp"
#include "bdlat/stats.hpp"
#include "bdlat/survival.hpp"

namespace bdlat {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_real(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(what + ": not a number: '" + text + "'");
  return x;
}

long long to_integer(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError(what + ": not an integer: '" + text + "'");
  return x;
}

std::string crc_hex(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

/// Key-value block that remembers which keys were read, so leftovers can be
/// reported as unknown.
class Block {
 public:
  Block(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {
    resolved_ = nlohmann::json::object();
  }

  bool present() const { return tree_ != nullptr; }
  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string text(const std::string& key, const std::string& fallback) {
    std::string v = fallback;
    if (auto raw = lookup(key)) v = *raw;
    resolved_[key] = v;
    return v;
  }
  double real(const std::string& key, double fallback) {
    double v = fallback;
    if (auto raw = lookup(key)) v = to_real(*raw, where(key));
    resolved_[key] = v;
    return v;
  }
  long long integer(const std::string& key, long long fallback) {
    long long v = fallback;
    if (auto raw = lookup(key)) v = to_integer(*raw, where(key));
    resolved_[key] = v;
    return v;
  }
  bool flag(const std::string& key, bool fallback) {
    bool v = fallback;
    if (auto raw = lookup(key)) {
      if (*raw == "true" || *raw == "1") v = true;
      else if (*raw == "false" || *raw == "0") v = false;
      else throw ConfigError(where(key) + ": expected true or false");
    }
    resolved_[key] = v;
    return v;
  }
  std::string required(const std::string& key) {
    auto raw = lookup(key);
    if (!raw) throw ConfigError(where(key) + ": required key missing");
    resolved_[key] = *raw;
    return *raw;
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_)
      if (!used_.contains(k)) throw ConfigError(where(k) + ": unknown key");
  }

  const nlohmann::json& resolved() const { return resolved_; }

 private:
  std::optional<std::string> lookup(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return trim(it->second.data());
  }
  std::string where(const std::string& key) const { return (name_.empty() ? "" : "[" + name_ + "] ") + key; }

  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
  nlohmann::json resolved_;
};

// Experiment-specific [params] keys and their defaults.
const std::map<std::string, std::map<std::string, std::string>>& param_table() {
  static const std::map<std::string, std::map<std::string, std::string>> table = {
      {"run", {{"replicate", "0"}}},
      {"oracle-compare", {{"cap", "5"}, {"times", "0.1,0.5,1"}, {"tv_tol", "0.02"}, {"cross_check", "false"}}},
      {"coupling", {{"method", "joint-gillespie"}, {"probe_pairs", "10000"}}},
      {"contraction", {{"times", "0.25,0.5"}}},
      {"martingale", {{"functions", "count,linear,product,mass"}}},
      {"drift", {{"samples", "10000"}, {"max_v", "100"}}},
      {"occupation", {{"samples", "10000"}, {"max_v", "100"}, {"n", "10,50"}, {"r", "5,10,20"}}},
      {"survival-sweep", {{"lambdas", "0.1,4"}, {"horizons", ""}, {"radii", ""}, {"g", "square"}}},
      {"bracket",
       {{"lo", "0"}, {"hi", "4"}, {"tol", "0.25"}, {"threshold", "0.02"}, {"max_replicates", "8000"}, {"g", "square"}}},
      {"window-convergence", {{"radii", "2,4,8"}}},
  };
  return table;
}

bool needs_model(const std::string& e) { return e != "survival-sweep" && e != "bracket"; }

DeathCurve death_curve(const std::string& name) {
  if (name == "square") return DeathCurve::square();
  if (name == "linear") return DeathCurve::linear();
  throw ConfigError("unknown death curve '" + name + "' (square, linear)");
}

ModelPtr parse_model(Block& b, int dim, std::optional<BPDLParams>* bpdl_out) {
  const std::string type = b.required("type");
  ModelPtr model;
  if (type == "bpdl") {
    BPDLParams p;
    p.b0 = b.real("b0", 1.0);
    p.m = b.real("m", 1.0);
    p.a_plus = parse_kernel(b.text("a_plus", "zero"), dim);
    p.a_minus = parse_kernel(b.text("a_minus", "zero"), dim);
    model = bpdl_rates(p);
    if (bpdl_out) *bpdl_out = p;
  } else if (type == "contact") {
    model = contact_rates(b.real("lambda", 1.0));
  } else if (type == "branch-local") {
    BranchLocalParams p;
    p.lambda = b.real("lambda", 1.0);
    p.g = death_curve(b.text("g", "square"));
    model = branch_local_rates(p);
  } else if (type == "aggregation") {
    AggregationParams p;
    const std::string birth = b.text("birth", "constant");
    const std::string death = b.text("death", "exponential");
    if (birth == "constant") p.birth_mode = AggregationBirth::Constant;
    else if (birth == "bpdl") p.birth_mode = AggregationBirth::BPDL;
    else throw ConfigError("aggregation birth must be constant or bpdl");
    if (death == "exponential") p.death_form = AggregationDeath::Exponential;
    else if (death == "reciprocal") p.death_form = AggregationDeath::Reciprocal;
    else throw ConfigError("aggregation death must be exponential or reciprocal");
    p.c = b.real("c", 1.0);
    p.phi = parse_kernel(b.text("phi", "zero"), dim);
    p.b0 = b.real("b0", 0.0);
    p.a_plus = parse_kernel(b.text("a_plus", "zero"), dim);
    model = aggregation_rates(p);
  } else if (type == "frozen") {
    model = frozen_rates();
  } else {
    throw ConfigError("[model] type: unknown model '" + type + "'");
  }
  const long long cap = b.integer("cap", -1);
  if (cap >= 0) model = capped(model, static_cast<int>(cap));
  return model;
}

struct Writer {
  fs::path dir;
  ExperimentOutcome* outcome;
  std::vector<std::pair<std::string, std::string>> hashes;

  void file(const std::string& name, const std::string& bytes) {
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (dir / name).string());
    os << bytes;
    outcome->files.push_back(name);
    hashes.emplace_back(name, crc_hex(bytes));
  }
  void table(const std::string& name, const CsvTable& t) { file(name, t.str()); }
};

std::string state_label(std::span<const int> occ) {
  std::string s;
  for (std::size_t i = 0; i < occ.size(); ++i) s += (i ? "-" : "") + std::to_string(occ[i]);
  return s;
}

std::size_t param_count(const ExperimentConfig& c, const std::string& key) {
  const long long n = to_integer(c.params.at(key), key);
  if (n < 0) throw ConfigError(key + " must be >= 0");
  return static_cast<std::size_t>(n);
}

const Configuration& need_initial(const ExperimentConfig& c) {
  if (!c.initial) throw ConfigError("[initial] block required for " + c.experiment);
  return *c.initial;
}

Site unit_site(int dim) {
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  e[0] = 1;
  return Site(e);
}

CylindricalFunction named_function(const std::string& name, const Window& window) {
  const int dim = window.dim();
  const Site o = Site::origin(dim), e = unit_site(dim);
  if (name == "count") return CylindricalFunction::truncated_count(o, 5);
  if (name == "linear") return CylindricalFunction::linear({-e, o, e}, {0.5, 1.0, 0.5});
  if (name == "product")
    return {"product", {o, e}, [](std::span<const int> v) { return static_cast<double>(v[0]) * v[1]; },
            std::numeric_limits<double>::infinity()};
  if (name == "indicator")
    return {"indicator", {o}, [](std::span<const int> v) { return v[0] > 0 ? 1.0 : 0.0; }, 1.0};
  if (name == "mass") return CylindricalFunction::weighted_mass(window, polynomial_lyapunov_weight(dim));
  throw ConfigError("unknown cylindrical function '" + name + "' (count, linear, product, indicator, mass)");
}

void run_trajectory(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  RunOptions opt;
  opt.algorithm = c.algorithm;
  opt.max_events = c.max_events;
  const auto rep = param_count(c, "replicate");
  const Configuration eta0 = c.initial ? *c.initial : Configuration(c.window);
  const Trajectory tr = run(c.model, eta0, c.horizon, c.seed, rep, opt);
  std::ostringstream log;
  write_event_log(log, tr, c.config_hash());
  w.file("events.jsonl", log.str());
  w.file("final.json", to_json(tr.final_state).dump() + "\n");
  out.summary.push_back("events=" + std::to_string(tr.events.size()) +
                        " final_mass=" + std::to_string(tr.final_state.total_mass()));
}

void run_oracle_compare(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const int cap = static_cast<int>(param_count(c, "cap"));
  const auto times = parse_reals(c.params.at("times"));
  const double tv_tol = to_real(c.params.at("tv_tol"), "tv_tol");
  const bool cross = c.params.at("cross_check") == "true" || c.params.at("cross_check") == "1";
  const Configuration& eta0 = need_initial(c);
  const ModelPtr model = capped(c.model, cap);
  oracle::CappedStateSpace space(c.window, cap);
  const auto Q = oracle::build_generator<double>(space, *model);
  const auto pi0 = oracle::point_mass<double>(space, space.index(eta0.dense()));

  RunOptions opt;
  opt.algorithm = c.algorithm;
  opt.max_events = c.max_events;
  opt.record_events = false;
  const auto samples = sample_states(model, eta0, times, c.replicates, c.seed, c.workers, opt);
  std::optional<std::vector<std::vector<std::vector<int>>>> other;
  if (cross) {
    RunOptions o2 = opt;
    o2.algorithm = c.algorithm == Algorithm::Gillespie ? Algorithm::Thinning : Algorithm::Gillespie;
    other = sample_states(model, eta0, times, c.replicates, c.seed, c.workers, o2);
  }

  const double n = static_cast<double>(c.replicates);
  auto law = [&](const std::vector<std::vector<int>>& states) {
    std::map<std::size_t, double> p;
    for (const auto& s : states) p[space.index(s)] += 1.0 / n;
    return p;
  };
  CsvTable summary({"t", "tv", "max_z", "tv_engines", "ok"});
  summary.meta("seed", c.seed).meta("replicates", std::uint64_t{c.replicates}).meta("cap", std::uint64_t(cap));
  bool all_ok = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto exact = oracle::transient<double>(Q, pi0, times[k]);
    const auto emp = law(samples[k]);
    std::map<std::size_t, double> exact_map;
    std::vector<DistributionRow> rows;
    double max_z = 0.0;
    for (std::size_t s = 0; s < space.size(); ++s) {
      const double p = exact(static_cast<Eigen::Index>(s));
      const double q = emp.contains(s) ? emp.at(s) : 0.0;
      exact_map[s] = p;
      const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
      if (se > 0.0) max_z = std::max(max_z, std::abs(q - p) / se);
      else if (q != p) max_z = std::numeric_limits<double>::infinity();
      rows.push_back({state_label(space.state(s)), p, q, se});
    }
    const double tv = tv_distance(exact_map, emp);
    std::string tv_engines;
    bool ok = tv <= tv_tol && max_z <= 3.0;
    if (other) {
      const double d = tv_distance(emp, law((*other)[k]));
      tv_engines = format_double(d);
      ok = ok && d <= tv_tol;
    }
    all_ok = all_ok && ok;
    w.table("oracle_t" + std::to_string(k) + ".csv", distribution_table(times[k], rows));
    summary.add_row({format_double(times[k]), format_double(tv), format_double(max_z), tv_engines, ok ? "1" : "0"});
    out.summary.push_back("t=" + format_double(times[k]) + " tv=" + format_double(tv) +
                          " max_z=" + format_double(max_z) + (other ? " tv_engines=" + tv_engines : ""));
  }
  w.table("oracle.csv", summary);
  if (!all_ok) out.exit_code = exit_code::assertion;
}

void run_coupling(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const Configuration& eta1 = need_initial(c);
  const Configuration& eta2 = c.initial2 ? *c.initial2 : eta1;
  CouplingOptions opt;
  opt.method = coupling_method_from_string(c.params.at("method"));
  opt.max_events = c.max_events;
  opt.record_events = false;
  const auto report = coupling_experiment(c.model, c.model2, eta1, eta2, c.horizon, c.seed, c.replicates, c.workers,
                                          opt, param_count(c, "probe_pairs"));
  w.file("domination.json", to_json(report).dump(2) + "\n");
  out.summary.push_back("clean=" + std::string(report.clean ? "true" : "false") +
                        " domination_violations=" + std::to_string(report.domination_violations) +
                        " inclusion_violations=" + std::to_string(report.inclusion_violations) +
                        " hypotheses_verified=" + (report.hypotheses_verified ? "true" : "false"));
  if (!report.clean) out.exit_code = exit_code::assertion;
}

struct WeightSpec {
  SiteFunction w;
  std::string text;
};

WeightSpec parse_weight(const std::string& text, int dim) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw ConfigError("[kernel] weight must be exp:q or poly:q");
  const double q = to_real(parts[1], "[kernel] weight");
  if (!(q > 0.0)) throw ConfigError("[kernel] weight exponent must be > 0");
  if (parts[0] == "exp") return {[q](const Site& x) { return std::exp(-q * x.norm1()); }, text};
  if (parts[0] == "poly")
    return {[q](const Site& x) { return 1.0 / (1.0 + std::pow(static_cast<double>(x.norm1()), q)); }, text};
  (void)dim;
  throw ConfigError("[kernel] weight must be exp:q or poly:q");
}

void run_contraction(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  if (!c.initial || !c.initial2) throw ConfigError("contraction needs [initial] and [initial2]");
  const int dim = c.window->dim();
  const auto weight = parse_weight(c.params.at("weight"), dim);
  const int n_max = static_cast<int>(param_count(c, "n_max"));
  const auto a = c.model->dominating_kernel(dim, n_max);
  if (!a) throw ConfigError("model '" + c.model->tag() + "' has no dominating kernel");
  const int ball = static_cast<int>(param_count(c, "validation_radius"));
  const double c_wa = validate_kernel(weight.w, a->as_function(), dim, ball, std::max(a->range(), 0)).c_wa;
  const auto result = contraction_check(c.model, *c.initial, *c.initial2, weight.w, c_wa,
                                        parse_reals(c.params.at("times")), c.replicates, c.seed, c.workers);
  CsvTable t = contraction_table(result);
  t.meta("c_wa", c_wa).meta("n_max", std::uint64_t(n_max)).meta("seed", c.seed);
  w.table("contraction.csv", t);
  bool ok = result.max_occupancy <= n_max;
  for (const auto& r : result.rows) {
    ok = ok && r.ok;
    out.summary.push_back("t=" + format_double(r.t) + " lhs=" + format_double(r.lhs) +
                          " se=" + format_double(r.std_error) + " bound=" + format_double(r.bound));
  }
  out.summary.push_back("c_wa=" + format_double(c_wa) + " max_occupancy=" + std::to_string(result.max_occupancy));
  if (!ok) out.exit_code = exit_code::assertion;
}

void run_martingale(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const Configuration& eta0 = need_initial(c);
  std::vector<std::pair<std::string, ResidualEstimate>> rows;
  bool ok = true;
  for (const auto& name : split(c.params.at("functions"), ',')) {
    const auto F = named_function(name, *c.window);
    const auto r = martingale_residual(F, c.model, eta0, c.horizon, c.replicates, c.seed, c.workers, c.algorithm);
    ok = ok && std::abs(r.residual) <= 3.0 * r.std_error;
    out.summary.push_back(name + ": residual=" + format_double(r.residual) + " se=" + format_double(r.std_error));
    rows.emplace_back(name, r);
  }
  CsvTable t = residual_table(rows, c.horizon);
  t.meta("seed", c.seed).meta("replicates", std::uint64_t{c.replicates});
  w.table("residual.csv", t);
  if (!ok) out.exit_code = exit_code::assertion;
}

DriftFit fit_for(const ExperimentConfig& c, const SiteFunction& v) {
  double c_va = 0.0;
  if (c.bpdl) {
    const Kernel& ap = c.bpdl->a_plus;
    if (!ap.support().empty())
      c_va = validate_kernel(v, ap.as_function(), c.window->dim(), static_cast<int>(param_count(c, "validation_radius")),
                             ap.range())
                 .c_wa;
  }
  return fit_drift_constants(c.model, c.window, v, param_count(c, "samples"), to_real(c.params.at("max_v"), "max_v"),
                             c.seed, c.bpdl, c_va);
}

void describe_fit(const DriftFit& fit, CsvTable& t, ExperimentOutcome& out) {
  t.meta("c1_fit", fit.c1_fit).meta("c1_ascent", fit.c1_ascent);
  if (fit.c1_certified) t.meta("c1_certified", *fit.c1_certified);
  out.summary.push_back("c1=" + format_double(fit.c1) + " c2=" + format_double(fit.c2) +
                        " violations=" + std::to_string(fit.verification.violations) +
                        (fit.c1_certified ? " c1_certified=" + format_double(*fit.c1_certified) : ""));
}

void run_drift(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const auto v = parse_weight(c.params.at("weight"), c.window->dim()).w;
  const DriftFit fit = fit_for(c, v);
  CsvTable t = drift_table(fit.verification);
  t.meta("seed", c.seed).meta("samples", std::uint64_t{fit.verification.samples.size()});
  describe_fit(fit, t, out);
  w.table("drift.csv", t);
  const bool certified_ok = !fit.c1_certified || fit.c1 <= *fit.c1_certified * (1 + 1e-9) + 1e-12;
  if (fit.verification.violations > 0 || !certified_ok) out.exit_code = exit_code::assertion;
}

void run_occupation(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const auto v = parse_weight(c.params.at("weight"), c.window->dim()).w;
  const DriftFit fit = fit_for(c, v);
  const auto rows = occupation_measure(c.model, c.window, v, fit.c1, fit.c2, parse_reals(c.params.at("n")),
                                       parse_reals(c.params.at("r")), c.seed, c.replicates, c.workers);
  CsvTable t = occupation_table(rows);
  t.meta("seed", c.seed).meta("replicates", std::uint64_t{c.replicates}).meta("c1", fit.c1).meta("c2", fit.c2);
  describe_fit(fit, t, out);
  w.table("occupation.csv", t);
  bool ok = fit.verification.violations == 0;
  for (const auto& r : rows) {
    ok = ok && r.ok;
    out.summary.push_back("n=" + format_double(r.n) + " r=" + format_double(r.r) + " mu=" + format_double(r.mu_hat) +
                          " bound=" + format_double(r.bound));
  }
  if (!ok) out.exit_code = exit_code::assertion;
}

SurvivalSetup survival_setup(const ExperimentConfig& c) {
  SurvivalSetup s;
  s.g = death_curve(c.params.at("g"));
  s.dim = c.window->dim();
  if (!c.window->radius()) throw ConfigError("survival experiments need a ball window");
  s.window_radius = *c.window->radius();
  s.horizon = c.horizon;
  s.workers = c.workers;
  s.max_events = c.max_events;
  return s;
}

void run_survival_sweep(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  const SurvivalSetup base = survival_setup(c);
  auto horizons = parse_reals(c.params.at("horizons"));
  if (horizons.empty()) horizons = {base.horizon};
  std::vector<int> radii;
  for (double r : parse_reals(c.params.at("radii"))) radii.push_back(static_cast<int>(r));
  if (radii.empty()) radii = {base.window_radius};
  std::vector<SurvivalEstimate> rows;
  for (double lambda : parse_reals(c.params.at("lambdas")))
    for (double T : horizons)
      for (int R : radii) {
        SurvivalSetup s = base;
        s.horizon = T;
        s.window_radius = R;
        rows.push_back(estimate_survival(lambda, s, c.replicates, c.seed));
        const auto& e = rows.back();
        out.summary.push_back("lambda=" + format_double(lambda) + " T=" + format_double(T) +
                              " radius=" + std::to_string(R) + " p_hat=" + format_double(e.p_hat) + " ci=[" +
                              format_double(e.ci95.first) + "," + format_double(e.ci95.second) + "]");
      }
  CsvTable t = survival_table(rows);
  t.meta("seed", c.seed).meta("g", c.params.at("g"));
  w.table("survival.csv", t);
}

void run_bracket(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  BracketOptions opt;
  opt.lo = to_real(c.params.at("lo"), "lo");
  opt.hi = to_real(c.params.at("hi"), "hi");
  opt.tol = to_real(c.params.at("tol"), "tol");
  opt.threshold = to_real(c.params.at("threshold"), "threshold");
  opt.replicates = c.replicates;
  opt.max_replicates = param_count(c, "max_replicates");
  const auto result = bracket_lambda_c(survival_setup(c), opt, c.seed);
  CsvTable t = bracket_table(result);
  t.meta("seed", c.seed).meta("threshold", opt.threshold).meta("g", c.params.at("g"));
  w.table("bracket.csv", t);
  out.summary.push_back("bracket=[" + format_double(result.lo) + "," + format_double(result.hi) +
                        "] unresolved=" + std::to_string(result.unresolved));
}

void run_window_convergence(const ExperimentConfig& c, Writer& w, ExperimentOutcome& out) {
  std::vector<int> radii;
  for (double r : parse_reals(c.params.at("radii"))) radii.push_back(static_cast<int>(r));
  const auto rows =
      window_convergence(c.model, need_initial(c), c.horizon, radii, c.seed, c.replicates, c.workers, c.algorithm);
  CsvTable t = marginal_table(rows);
  t.meta("seed", c.seed).meta("replicates", std::uint64_t{c.replicates});
  w.table("marginal.csv", t);
  for (const auto& r : rows)
    out.summary.push_back("radius=" + std::to_string(r.radius) +
                          (r.tv_to_previous ? " tv_to_previous=" + format_double(*r.tv_to_previous) : ""));
}

}  // namespace

std::string ExperimentConfig::config_hash() const { return crc_hex(resolved.dump()); }

fs::path default_output_dir() {
  if (const char* env = std::getenv("BDLAT_OUTPUT_DIR"); env && *env) return env;
  return "bdlat-out";
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(to_real(part, "list"));
  return out;
}

std::vector<Site> parse_sites(const std::string& text, int dim) {
  std::vector<Site> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ';')) {
    std::vector<int> coords;
    for (const auto& c : split(part, ',')) coords.push_back(static_cast<int>(to_integer(c, "site")));
    if (static_cast<int>(coords.size()) != dim)
      throw ConfigError("site '" + part + "' has " + std::to_string(coords.size()) + " coordinates, expected " +
                        std::to_string(dim));
    out.emplace_back(std::move(coords));
  }
  return out;
}

Configuration parse_counts(const std::string& text, const WindowPtr& window) {
  Configuration eta(window);
  if (trim(text).empty()) return eta;
  for (const auto& part : split(text, ';')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw ConfigError("count '" + part + "' must look like x:n");
    const auto sites = parse_sites(part.substr(0, colon), window->dim());
    const long long n = to_integer(part.substr(colon + 1), "count");
    if (n < 0) throw ConfigError("negative count in '" + part + "'");
    eta.add(sites.at(0), static_cast<int>(n));
  }
  return eta;
}

Kernel parse_kernel(const std::string& spec_text, int dim) {
  const std::string spec = trim(spec_text);
  if (spec == "zero" || spec.empty()) return Kernel::zero(dim);
  if (spec.front() == '[') {
    try {
      std::vector<std::pair<Site, double>> support;
      for (const auto& entry : nlohmann::json::parse(spec)) {
        support.emplace_back(Site(entry.at(0).get<std::vector<int>>()), entry.at(1).get<double>());
        if (support.back().first.dim() != dim) throw ConfigError("kernel offset has the wrong dimension");
      }
      return Kernel(dim, std::move(support));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("kernel list: ") + e.what());
    }
  }
  const auto parts = split(spec, ':');
  if (parts[0] == "box" && parts.size() == 3)
    return Kernel::box(dim, to_real(parts[1], "box kernel"), static_cast<int>(to_integer(parts[2], "box kernel")));
  if (parts[0] == "point" && parts.size() == 2) return Kernel::point(dim, to_real(parts[1], "point kernel"));
  throw ConfigError("kernel '" + spec + "': expected box:c:k, point:c, zero or a JSON list");
}

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const std::set<std::string> sections = {"model", "model2", "kernel", "window", "initial", "initial2", "params"};
  pt::ptree top;
  std::map<std::string, const pt::ptree*> blocks;
  for (const auto& [key, child] : tree) {
    if (!child.empty()) {
      if (!sections.contains(key)) throw ConfigError("[" + key + "]: unknown block");
      blocks[key] = &child;
    } else {
      top.put_child(pt::ptree::path_type(key, '\0'), child);
    }
  }
  auto block = [&](const std::string& name) { return Block(name, blocks.contains(name) ? blocks[name] : nullptr); };

  ExperimentConfig c;
  Block t("", &top);
  c.experiment = t.required("experiment");
  const auto& tags = experiment_tags();
  if (std::find(tags.begin(), tags.end(), c.experiment) == tags.end())
    throw ConfigError("experiment: unknown tag '" + c.experiment + "'");
  const long long seed = t.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  const long long reps = t.integer("replicates", 1000);
  if (reps < 1) throw ConfigError("replicates must be >= 1");
  c.replicates = static_cast<std::size_t>(reps);
  c.horizon = t.real("horizon", 1.0);
  if (!(c.horizon >= 0.0)) throw ConfigError("horizon must be >= 0");
  c.algorithm = algorithm_from_string(t.text("algorithm", "gillespie"));
  const long long max_events = t.integer("max_events", static_cast<long long>(kDefaultMaxEvents));
  if (max_events < 1) throw ConfigError("max_events must be >= 1");
  c.max_events = static_cast<std::uint64_t>(max_events);
  c.output_dir = t.text("output", "");
  if (c.output_dir.empty()) c.output_dir = default_output_dir();
  const long long workers = t.integer("workers", 1);
  if (workers < 0) throw ConfigError("workers must be >= 0");
  c.workers = static_cast<unsigned>(workers);
  t.finish();

  nlohmann::json r = {{"experiment", c.experiment},
                      {"seed", c.seed},
                      {"replicates", c.replicates},
                      {"horizon", c.horizon},
                      {"algorithm", to_string(c.algorithm)},
                      {"max_events", c.max_events}};

  const bool survival = !needs_model(c.experiment);
  Block wb = block("window");
  const int dim = static_cast<int>(wb.integer("dim", 1));
  if (dim < 1) throw ConfigError("[window] dim must be >= 1");
  if (wb.has("sites") && wb.has("radius")) throw ConfigError("[window] give either radius or sites");
  if (wb.has("sites")) {
    c.window = Window::from_sites(parse_sites(wb.text("sites", ""), dim));
  } else {
    const long long radius = wb.integer("radius", survival ? 20 : 5);
    if (radius < 0) throw ConfigError("[window] radius must be >= 0");
    c.window = Window::ball(dim, static_cast<int>(radius));
  }
  wb.finish();
  r["window"] = wb.resolved();

  Block mb = block("model");
  if (mb.present() || !survival) {
    c.model = parse_model(mb, dim, &c.bpdl);
    mb.finish();
    r["model"] = mb.resolved();
  }
  Block m2 = block("model2");
  if (m2.present()) {
    c.model2 = parse_model(m2, dim, nullptr);
    m2.finish();
    r["model2"] = m2.resolved();
  } else {
    c.model2 = c.model;
  }

  for (const char* name : {"initial", "initial2"}) {
    Block ib = block(name);
    if (!ib.present()) continue;
    auto eta = parse_counts(ib.text("counts", ""), c.window);
    ib.finish();
    r[name] = ib.resolved();
    (std::string(name) == "initial" ? c.initial : c.initial2) = std::move(eta);
  }

  // [kernel]: weight function and the occupancy level of the dominating kernel.
  Block kb = block("kernel");
  std::map<std::string, std::string> kernel_keys;
  const bool uses_weight = c.experiment == "contraction" || c.experiment == "drift" || c.experiment == "occupation";
  if (uses_weight) {
    const std::string default_weight =
        c.experiment == "contraction" ? "exp:1" : "poly:" + std::to_string(dim + 1);
    kernel_keys["weight"] = kb.text("weight", default_weight);
    kernel_keys["validation_radius"] = std::to_string(kb.integer("validation_radius", 30));
    if (c.experiment == "contraction") kernel_keys["n_max"] = std::to_string(kb.integer("n_max", 10));
    r["kernel"] = kb.resolved();
  }
  kb.finish();

  Block pb = block("params");
  for (const auto& [key, fallback] : param_table().at(c.experiment)) c.params[key] = pb.text(key, fallback);
  pb.finish();
  r["params"] = pb.resolved();
  for (auto& [k, v] : kernel_keys) c.params[k] = v;

  c.resolved = std::move(r);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  return parse_config(is);
}

ExperimentOutcome run_experiment(const ExperimentConfig& c) {
  ExperimentOutcome out;
  Writer w{c.output_dir, &out, {}};
  const std::string& e = c.experiment;
  if (e == "run") run_trajectory(c, w, out);
  else if (e == "oracle-compare") run_oracle_compare(c, w, out);
  else if (e == "coupling") run_coupling(c, w, out);
  else if (e == "contraction") run_contraction(c, w, out);
  else if (e == "martingale") run_martingale(c, w, out);
  else if (e == "drift") run_drift(c, w, out);
  else if (e == "occupation") run_occupation(c, w, out);
  else if (e == "survival-sweep") run_survival_sweep(c, w, out);
  else if (e == "bracket") run_bracket(c, w, out);
  else if (e == "window-convergence") run_window_convergence(c, w, out);
  else throw ConfigError("experiment: unknown tag '" + e + "'");

  std::string all;
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, crc] : w.hashes) {
    files.push_back({{"file", name}, {"crc32", crc}});
    all += name + ":" + crc + "\n";
  }
  const auto now = std::chrono::system_clock::now();
  nlohmann::json manifest = {
      {"experiment", c.experiment},
      {"config", c.resolved},
      {"config_hash", c.config_hash()},
      {"seed", c.seed},
      {"workers", c.workers},
      {"outputs", files},
      {"content_hash", crc_hex(all)},
      {"exit_code", out.exit_code},
      {"created_unix", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
  };
  fs::create_directories(c.output_dir);
  std::ofstream(c.output_dir / "manifest.json") << manifest.dump(2) << '\n';
  return out;
}

int run_cli(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<unsigned> workers,
            std::optional<fs::path> output_dir, std::ostream& out, std::ostream& err) {
  auto fail = [&err](const char* kind, const std::string& message, int code) {
    err << "error kind=" << kind << " message=" << nlohmann::json(message).dump() << '\n';
    return code;
  };
  try {
    ExperimentConfig c = load_config(config_path);
    if (seed) {
      c.seed = *seed;
      c.resolved["seed"] = *seed;
    }
    if (workers) c.workers = *workers;
    if (output_dir) c.output_dir = *output_dir;
    const auto outcome = run_experiment(c);
    out << c.experiment << " seed=" << c.seed << " config_hash=" << c.config_hash() << '\n';
    for (const auto& line : outcome.summary) out << line << '\n';
    for (const auto& f : outcome.files) out << "wrote " << (c.output_dir / f).string() << '\n';
    if (outcome.exit_code == exit_code::assertion) return fail("assertion", "acceptance check failed", outcome.exit_code);
    return outcome.exit_code;
  } catch (const ExplosionError& e) {
    return fail("explosion", e.what(), exit_code::explosion);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), exit_code::config);
  } catch (const ValidationError& e) {
    return fail("config", e.what(), exit_code::config);
  } catch (const ModelError& e) {
    return fail("model", e.what(), exit_code::config);
  } catch (const EnvelopeError& e) {
    return fail("envelope", e.what(), exit_code::assertion);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), exit_code::internal);
  }
}

}  // namespace bdlat
