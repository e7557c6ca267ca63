#include "bdlat/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "bdlat/errors.hpp"
#include "json.hpp"

namespace bdlat {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_event_log(std::ostream& os, const Trajectory& trajectory, const std::string& config_hash) {
  nlohmann::ordered_json header = {
      {"config_hash", config_hash},
      {"seed", trajectory.seed},
      {"replicate", trajectory.replicate},
      {"model", trajectory.model_tag},
      {"algorithm", to_string(trajectory.algorithm)},
      {"horizon", trajectory.horizon},
      {"initial", to_json(trajectory.initial)},
  };
  os << header.dump() << '\n';
  for (const auto& e : trajectory.events) {
    const auto coords = trajectory.site(e).coords();
    nlohmann::ordered_json line = {
        {"t", e.time},
        {"x", std::vector<int>(coords.begin(), coords.end())},
        {"d", static_cast<int>(e.delta)},
        {"ch", e.channel == Channel::Birth ? "b" : "d"},
    };
    os << line.dump() << '\n';
  }
}

EventLog read_event_log(std::istream& is) {
  EventLog log;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("event log: missing header line");
  try {
    const auto header = nlohmann::json::parse(line);
    log.config_hash = header.at("config_hash").get<std::string>();
    log.seed = header.at("seed").get<std::uint64_t>();
    log.model = header.at("model").get<std::string>();
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      LoggedEvent e;
      e.t = j.at("t").get<double>();
      e.x = Site(j.at("x").get<std::vector<int>>());
      e.delta = j.at("d").get<int>();
      const auto ch = j.at("ch").get<std::string>();
      if ((ch != "b" && ch != "d") || (e.delta != 1 && e.delta != -1))
        throw ConfigError("event log: bad event record: " + line);
      e.channel = ch == "b" ? Channel::Birth : Channel::Death;
      log.events.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("event log: ") + ex.what());
  }
  return log;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvTable& CsvTable::meta(const std::string& key, const std::string& value) {
  meta_.emplace_back(key, value);
  return *this;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size()) throw std::logic_error("csv row has the wrong number of cells");
  rows_.push_back(std::move(cells));
}

void CsvTable::write(std::ostream& os) const {
  for (const auto& [k, v] : meta_) os << "# " << k << '=' << v << '\n';
  auto line = [&os](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

namespace {

std::string num(double x) { return format_double(x); }
std::string num(std::size_t n) { return std::to_string(n); }
std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace

CsvTable drift_table(const DriftReport& report) {
  CsvTable t({"sample", "V", "LV", "bound", "slack"});
  t.meta("c1", report.c1).meta("c2", report.c2).meta("fitted", flag(report.fitted));
  t.meta("violations", std::uint64_t{report.violations});
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    const double bound = report.c1 - report.c2 * s.V;
    t.add_row({num(i), num(s.V), num(s.LV), num(bound), num(s.LV - bound)});
  }
  return t;
}

CsvTable residual_table(const std::vector<std::pair<std::string, ResidualEstimate>>& rows, double time) {
  CsvTable t({"F", "t", "residual", "std_error", "replicates"});
  for (const auto& [name, r] : rows) t.add_row({name, num(time), num(r.residual), num(r.std_error), num(r.replicates)});
  return t;
}

CsvTable survival_table(const std::vector<SurvivalEstimate>& rows) {
  CsvTable t({"lambda", "T", "radius", "replicates", "p_hat", "ci_lo", "ci_hi"});
  for (const auto& e : rows)
    t.add_row({num(e.lambda), num(e.horizon), std::to_string(e.window_radius), num(e.replicates), num(e.p_hat),
               num(e.ci95.first), num(e.ci95.second)});
  return t;
}

CsvTable bracket_table(const BracketResult& result) {
  CsvTable t({"step", "lambda", "replicates", "p_hat", "ci_lo", "ci_hi", "side", "resolved"});
  t.meta("lo", result.lo).meta("hi", result.hi).meta("unresolved", std::uint64_t{result.unresolved});
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& s = result.steps[i];
    t.add_row({num(i), num(s.estimate.lambda), num(s.estimate.replicates), num(s.estimate.p_hat),
               num(s.estimate.ci95.first), num(s.estimate.ci95.second),
               s.side == Side::Survives ? "survives" : "extinct", flag(s.resolved)});
  }
  return t;
}

CsvTable contraction_table(const ContractionResult& result) {
  CsvTable t({"t", "lhs", "std_error", "bound", "ok"});
  t.meta("max_occupancy", std::uint64_t(result.max_occupancy));
  for (const auto& r : result.rows) t.add_row({num(r.t), num(r.lhs), num(r.std_error), num(r.bound), flag(r.ok)});
  return t;
}

CsvTable occupation_table(const std::vector<OccupationRow>& rows) {
  CsvTable t({"n", "r", "mu_hat", "std_error", "bound", "ok"});
  for (const auto& r : rows) t.add_row({num(r.n), num(r.r), num(r.mu_hat), num(r.std_error), num(r.bound), flag(r.ok)});
  return t;
}

CsvTable marginal_table(const std::vector<MarginalRow>& rows) {
  CsvTable t({"radius", "occupancy", "probability", "tv_to_previous"});
  for (const auto& r : rows)
    for (const auto& [n, p] : r.law)
      t.add_row({std::to_string(r.radius), std::to_string(n), num(p),
                 r.tv_to_previous ? num(*r.tv_to_previous) : std::string()});
  return t;
}

CsvTable distribution_table(double time, const std::vector<DistributionRow>& rows) {
  CsvTable t({"t", "state", "exact", "empirical", "std_error"});
  for (const auto& r : rows) t.add_row({num(time), r.state, num(r.exact), num(r.empirical), num(r.std_error)});
  return t;
}

}  // namespace bdlat
