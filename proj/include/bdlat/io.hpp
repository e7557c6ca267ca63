#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bdlat/analysis.hpp"
#include "bdlat/coupling.hpp"
#include "bdlat/engine.hpp"
#include "bdlat/survival.hpp"

namespace bdlat {

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

/// JSONL: a header object {"config_hash", "seed", "replicate", "model",
/// "algorithm", "horizon", "window", "initial"} then one line per event
/// {"t": 0.25, "x": [1], "d": 1, "ch": "b"}.
void write_event_log(std::ostream& os, const Trajectory& trajectory, const std::string& config_hash);

struct LoggedEvent {
  double t = 0.0;
  Site x;
  int delta = 0;
  Channel channel = Channel::Birth;
};

struct EventLog {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<LoggedEvent> events;
};

EventLog read_event_log(std::istream& is);

/// A CSV table preceded by "# key=value" lines echoing the parameters
/// (seeds, replicate counts) that produced it.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& meta(const std::string& key, const std::string& value);
  CsvTable& meta(const std::string& key, double value) { return meta(key, format_double(value)); }
  CsvTable& meta(const std::string& key, std::uint64_t value) { return meta(key, std::to_string(value)); }
  void add_row(std::vector<std::string> cells);

  void write(std::ostream& os) const;
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<std::string>> rows_;
};

// Column layouts are listed in the README.
CsvTable drift_table(const DriftReport& report);
CsvTable residual_table(const std::vector<std::pair<std::string, ResidualEstimate>>& rows, double t);
CsvTable survival_table(const std::vector<SurvivalEstimate>& rows);
CsvTable bracket_table(const BracketResult& result);
CsvTable contraction_table(const ContractionResult& result);
CsvTable occupation_table(const std::vector<OccupationRow>& rows);
CsvTable marginal_table(const std::vector<MarginalRow>& rows);

struct DistributionRow {
  std::string state;
  double exact = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
};
CsvTable distribution_table(double t, const std::vector<DistributionRow>& rows);

}  // namespace bdlat
