#include "rfl/experiments.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "rfl/csv.hpp"
#include "rfl/errors.hpp"
#include "rfl/parallel.hpp"

namespace rfl {

std::string version() { return "0.1.0"; }

RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw FitError("fit needs equally many abscissae and values");
  if (x.size() < 3) throw FitError("fit needs at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) ||
        !std::isfinite(y[i]))
      throw FitError("log-log fit needs positive finite data (point " +
                     std::to_string(i) + ")");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("fit needs distinct abscissae");
  RateFit f;
  f.points = static_cast<int>(n);
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
  }
  f.stderr_slope = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  return f;
}

std::vector<std::string> sweep_csv_header() {
  return {"quantity", "abscissa", "epsilon", "gamma", "t",
          "points",   "slope",    "stderr",  "intercept", "status"};
}

std::vector<std::string> sweep_csv_row(const SweepFit& f) {
  return {f.quantity,
          f.abscissa,
          format_real(f.epsilon),
          format_real(f.gamma),
          format_real(f.t),
          std::to_string(f.fit.points),
          format_real(f.fit.slope),
          format_real(f.fit.stderr_slope),
          format_real(f.fit.intercept),
          f.status};
}

namespace {

double column_value(const DiscrepancyReport& r, const std::string& name) {
  if (name == "D") return r.D;
  if (name == "I_eps_fd") return r.I_eps_fd;
  if (name == "I1") return r.I1;
  if (name == "I2") return r.I2;
  if (name == "I2_a_limit") return r.I2_a_limit;
  if (name == "singular_bound") return r.singular_bound;
  if (name == "eqfin_residual") return r.eqfin_residual;
  if (name == "error_bound") return r.error_bound;
  throw InvalidInput("unknown report column '" + name + "'");
}

}  // namespace

std::vector<SweepFit> fit_sweep(const ScenarioConfig& config,
                                const std::vector<DiscrepancyReport>& rows) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::size_t ne = config.epsilons.size(), ng = config.gammas.size(),
                    nt = config.times.size();
  if (rows.size() != ne * ng * nt)
    throw InvalidInput("sweep rows do not cover the parameter grid");
  auto row = [&](std::size_t ie, std::size_t ig, std::size_t it) -> auto& {
    return rows[(ie * ng + ig) * nt + it];
  };
  std::vector<SweepFit> out;
  for (const std::string& q : config.fit_columns)
    for (int axis = 0; axis < 3; ++axis) {
      const std::size_t len = axis == 0 ? ne : axis == 1 ? ng : nt;
      if (len < 3) continue;
      const std::size_t o1 = axis == 0 ? ng : ne;
      const std::size_t o2 = axis == 2 ? ng : nt;
      for (std::size_t a = 0; a < o1; ++a)
        for (std::size_t b = 0; b < o2; ++b) {
          SweepFit f;
          f.quantity = q;
          std::vector<double> xs, ys;
          bool negative = false;
          for (std::size_t k = 0; k < len; ++k) {
            const std::size_t ie = axis == 0 ? k : a;
            const std::size_t ig = axis == 1 ? k : axis == 0 ? a : b;
            const std::size_t it = axis == 2 ? k : b;
            const DiscrepancyReport& r = row(ie, ig, it);
            f.epsilon = axis == 0 ? nan : r.epsilon;
            f.gamma = axis == 1 ? nan : r.gamma;
            f.t = axis == 2 ? nan : r.t;
            xs.push_back(axis == 0 ? r.epsilon : axis == 1 ? 1.0 + r.gamma : r.t);
            const double v = column_value(r, q);
            negative = negative || v < 0.0;
            ys.push_back(std::abs(v));
          }
          f.abscissa = axis == 0 ? "epsilon" : axis == 1 ? "1+gamma" : "t";
          try {
            f.fit = fit_rate(xs, ys);
            f.status = negative ? "nonpositive" : "ok";
          } catch (const FitError&) {
            f.fit = {nan, nan, nan, static_cast<int>(len)};
            f.status = "undefined";
          }
          out.push_back(f);
        }
    }
  return out;
}

namespace {

std::vector<double> ensemble_times(const std::vector<double>& times) {
  std::vector<double> out{0.0};
  for (double t : times) out.push_back(t);
  return out;
}

std::shared_ptr<const FlowMap> make_map(const ScenarioConfig& c,
                                        const FlowSolverConfig& solver,
                                        const std::vector<double>& times,
                                        ScenarioFlows& flows) {
  const PiecewiseField& field = catalog(c.field_id, c.dim);
  bool grid = c.flow_map == FlowMapKind::grid;
  if (c.flow_map == FlowMapKind::automatic)
    grid = !field.has_jumps() && solver.method == SolverMethod::rk4_event;
  if (!grid) return std::make_shared<SolverFlowMap>(field, solver);
  auto ens = std::make_shared<const FlowEnsemble>(
      integrate_flow(field, solver, c.flow_grid, ensemble_times(times)));
  flows.ensembles.push_back(ens);
  return std::make_shared<GridFlowMap>(field, *ens);
}

}  // namespace

ScenarioFlows build_flows(const ScenarioConfig& config,
                          const std::vector<double>& times) {
  ScenarioFlows flows;
  flows.X = make_map(config, config.solver, times, flows);
  std::shared_ptr<const FlowMap> base = flows.X;
  if (config.pair_independent) {
    FlowSolverConfig s = config.solver;
    s.method = config.pair_solver.method;
    s.h = config.pair_solver.h;
    s.event_tol = std::min(s.event_tol, s.h);
    base = make_map(config, s, times, flows);
  }
  if (config.pair_pre.norm() == 0.0 && config.pair_post.norm() == 0.0)
    flows.Y = base;
  else
    flows.Y = std::make_shared<ShiftedFlowMap>(base, config.pair_pre,
                                               config.pair_post);
  return flows;
}

namespace {

std::vector<double> needed_times(const ScenarioConfig& c) {
  std::vector<double> out;
  for (double t : c.times)
    for (int k = -2; k <= 2; ++k) out.push_back(t + k * c.dt_fd);
  if (c.uniqueness) {
    const UniquenessConfig& u = c.uniqueness_config;
    for (int k = 0; k <= u.time_steps; ++k)
      out.push_back(u.T * k / u.time_steps);
    for (double t : u.residual_times)
      for (int k = -1; k <= 1; ++k) out.push_back(t + k * u.dt_fd);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
            out.end());
  return out;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ScenarioResult result;
  const ScenarioFlows flows = build_flows(config, needed_times(config));
  ReportOptions opts;
  opts.C_t = config.c_t;
  opts.error_estimate = config.error_estimate;
  for (double eps : config.epsilons)
    for (double gamma : config.gammas) {
      const AnisotropicKernel kernel = config.kernel(gamma);
      for (double t : config.times)
        result.reports.push_back(discrepancy_report(
            *flows.X, *flows.Y, kernel, config.functional(eps, t), opts));
    }
  result.fits = fit_sweep(config, result.reports);
  if (config.uniqueness) {
    result.has_uniqueness = true;
    result.uniqueness =
        uniqueness_report(*flows.X, *flows.Y, config.kernel(config.gammas.front()),
                          config.uniqueness_config);
  }
  result.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return result;
}

void write_report_csv(const std::vector<DiscrepancyReport>& rows,
                      std::ostream& out) {
  write_csv_row(out, report_csv_header());
  for (const DiscrepancyReport& r : rows) write_csv_row(out, report_csv_row(r));
}

void write_sweep_csv(const std::vector<SweepFit>& fits, std::ostream& out) {
  write_csv_row(out, sweep_csv_header());
  for (const SweepFit& f : fits) write_csv_row(out, sweep_csv_row(f));
}

void write_uniqueness_csv(const UniquenessReport& r, std::ostream& out) {
  write_csv_row(out, {"kind", "index", "t", "epsilon", "value"});
  for (std::size_t i = 0; i < r.times.size(); ++i)
    write_csv_row(out, {"discrepancy", std::to_string(i), format_real(r.times[i]),
                        "", format_real(r.discrepancy[i])});
  const std::size_t per =
      r.eqfin_residual.empty() ? 0 : r.rows.size() / r.eqfin_residual.size();
  for (std::size_t i = 0; i < r.eqfin_residual.size(); ++i)
    write_csv_row(out, {"eqfin_residual", std::to_string(i), "",
                        format_real(per ? r.rows[i * per].epsilon : 0.0),
                        format_real(r.eqfin_residual[i])});
  write_csv_row(out, {"gronwall_bound", "0", "", "", format_real(r.gronwall_bound)});
  write_csv_row(out, {"verdict", "0", "", "", to_string(r.verdict)});
}

void write_meta(const ScenarioConfig& config, double wall_seconds,
                std::ostream& out) {
  config.write(out);
  out << "# rfl " << version() << '\n';
  out << "# eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << '\n';
#if defined(__clang__)
  out << "# compiler clang " << __clang_version__ << '\n';
#elif defined(__GNUC__)
  out << "# compiler gcc " << __VERSION__ << '\n';
#endif
  out << "# threads " << thread_count() << '\n';
  out << "# wall_seconds " << format_real(wall_seconds) << '\n';
}

namespace {

std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw InvalidInput("cannot write " + p.string());
  return out;
}

}  // namespace

void write_outputs(const ScenarioConfig& config, const ScenarioResult& result) {
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create " + dir.string() + ": " + ec.message());
  {
    auto out = open_output(dir / "report.csv");
    write_report_csv(result.reports, out);
  }
  {
    auto out = open_output(dir / "sweep.csv");
    write_sweep_csv(result.fits, out);
  }
  if (result.has_uniqueness) {
    auto out = open_output(dir / "uniqueness.csv");
    write_uniqueness_csv(result.uniqueness, out);
  }
  auto out = open_output(dir / "meta");
  write_meta(config, result.wall_seconds, out);
}

namespace {

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i] + 0.0;
  os << ')';
  return os.str();
}

}  // namespace

void write_catalog(std::ostream& out) {
  out << "id  class         jumps  |D^s b|   description\n";
  for (const std::string& id : catalog_ids()) {
    const PiecewiseField& f = catalog(id);
    char line[64];
    std::snprintf(line, sizeof line, "%-3s %-13s %5zu  %-8.4g  ", id.c_str(),
                  to_string(f.classification()).c_str(), f.jumps().size(),
                  f.singular_mass());
    out << line << f.description() << '\n';
    for (std::size_t j = 0; j < f.jumps().size(); ++j) {
      const JumpComponent& c = f.jumps()[j];
      out << "      jump " << j << ": k=" << vec_text(c.wavevector.cast<double>())
          << " offset=" << c.offset << " eta_b=" << vec_text(c.normal())
          << " xi_b=" << vec_text(c.jump_direction())
          << " sigma=" << c.density()
          << " <xi_b,eta_b>=" << c.jump_direction().dot(c.normal()) + 0.0 << '\n';
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
      cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FitError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FitError(path + ": empty file");
  t.header = split_csv(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv(line));
  }
  return t;
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FitError("no column named '" + name + "'");
  const std::size_t c = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  for (const auto& row : rows) {
    if (c >= row.size()) throw FitError("short row in column '" + name + "'");
    try {
      std::size_t used = 0;
      out.push_back(std::stod(row[c], &used));
      if (used != row[c].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw FitError("column '" + name + "' has non-numeric value '" + row[c] +
                     "'");
    }
  }
  return out;
}

}  // namespace rfl
