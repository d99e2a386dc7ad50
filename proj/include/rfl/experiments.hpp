#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rfl/config.hpp"
#include "rfl/functionals.hpp"

namespace rfl {

/// Version string of the library.
std::string version();

/// Least-squares line through (log x, log y).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};
/// FitError for fewer than 3 points, mismatched lengths or nonpositive data.
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

/// One fitted rate of sweep.csv: `quantity` against `abscissa` (epsilon,
/// 1+gamma or t) with the other two parameters held fixed.
struct SweepFit {
  std::string quantity;
  std::string abscissa;
  double epsilon = 0.0;  // fixed values; the swept one is NaN
  double gamma = 0.0;
  double t = 0.0;
  RateFit fit;
  /// "ok"; "nonpositive" when a value is negative (|value| is fitted);
  /// "undefined" when no fit exists.
  std::string status;
};

std::vector<std::string> sweep_csv_header();
std::vector<std::string> sweep_csv_row(const SweepFit& f);
/// Rates of every configured column along each parameter list with at least
/// 3 values.
std::vector<SweepFit> fit_sweep(const ScenarioConfig& config,
                                const std::vector<DiscrepancyReport>& rows);

/// The pair of flows a scenario compares, with whatever ensembles back them.
struct ScenarioFlows {
  std::shared_ptr<const FlowMap> X;
  std::shared_ptr<const FlowMap> Y;
  std::vector<std::shared_ptr<const FlowEnsemble>> ensembles;
};
/// `times` are the instants the functionals will be evaluated at (grid maps
/// integrate exactly these).
ScenarioFlows build_flows(const ScenarioConfig& config,
                          const std::vector<double>& times);

struct ScenarioResult {
  std::vector<DiscrepancyReport> reports;
  std::vector<SweepFit> fits;
  bool has_uniqueness = false;
  UniquenessReport uniqueness;
  double wall_seconds = 0.0;
};

/// Runs every (epsilon, gamma, t) report, the fits and, when enabled, the
/// uniqueness pipeline. Rows are ordered epsilon-major, then gamma, then t.
ScenarioResult run_scenario(const ScenarioConfig& config);
/// report.csv, sweep.csv, meta and (when enabled) uniqueness.csv in
/// config.output_dir.
void write_outputs(const ScenarioConfig& config, const ScenarioResult& result);

void write_report_csv(const std::vector<DiscrepancyReport>& rows,
                      std::ostream& out);
void write_sweep_csv(const std::vector<SweepFit>& fits, std::ostream& out);
void write_uniqueness_csv(const UniquenessReport& r, std::ostream& out);
/// Config echo followed by comment lines with versions, threads and timing.
void write_meta(const ScenarioConfig& config, double wall_seconds,
                std::ostream& out);

/// Field table for the `catalog` subcommand.
void write_catalog(std::ostream& out);

/// Numeric columns of a CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// FitError naming the column when it is absent or not numeric.
  std::vector<double> column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

}  // namespace rfl
