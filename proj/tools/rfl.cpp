#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "rfl/checks.hpp"
#include "rfl/config.hpp"
#include "rfl/errors.hpp"
#include "rfl/experiments.hpp"
#include "rfl/parallel.hpp"

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kInvalid = 2, kNumerical = 3 };

bool finite_report(const rfl::DiscrepancyReport& r) {
  for (double v : {r.D, r.I_eps_fd, r.I1, r.I2, r.I2_a_limit, r.singular_bound,
                   r.eqfin_residual, r.error_bound})
    if (!std::isfinite(v)) return false;
  return true;
}

int run_config(const std::string& path, bool print_fits) {
  const rfl::ScenarioConfig config = rfl::ScenarioConfig::load(path);
  if (print_fits && config.epsilons.size() < 3 && config.gammas.size() < 3 &&
      config.times.size() < 3)
    throw rfl::ConfigError(path +
                           ": sweep needs a list of at least 3 values in "
                           "functional.epsilon, functional.gamma or "
                           "functional.t");
  const rfl::ScenarioResult result = rfl::run_scenario(config);
  for (const auto& r : result.reports)
    if (!finite_report(r)) {
      std::cerr << "rfl: non-finite value in the report at epsilon="
                << r.epsilon << " gamma=" << r.gamma << " t=" << r.t << "\n";
      return kNumerical;
    }
  rfl::write_outputs(config, result);
  std::printf("%zu report rows written to %s (%.1f s)\n", result.reports.size(),
              config.output_dir.c_str(), result.wall_seconds);
  if (result.has_uniqueness)
    std::printf("uniqueness: %s, final discrepancy %.3g\n",
                rfl::to_string(result.uniqueness.verdict).c_str(),
                result.uniqueness.final_discrepancy);
  if (print_fits)
    for (const auto& f : result.fits)
      std::printf("%-15s vs %-8s slope %+.4f +- %.4f (%d points, %s)\n",
                  f.quantity.c_str(), f.abscissa.c_str(), f.fit.slope,
                  f.fit.stderr_slope, f.fit.points, f.status.c_str());
  return kOk;
}

int run_checks(bool full, double normalization_scale,
               const std::string& filter) {
  rfl::CheckOptions options;
  options.filter = filter;
  options.full = full;
  options.normalization_scale = normalization_scale;
  int failed = 0;
  const auto items = rfl::run_checks(options, [&](const rfl::CheckItem& item) {
    std::printf("[%s] %s: %s (%s) %.1fs\n", item.passed ? "PASS" : "FAIL",
                item.module.c_str(), item.name.c_str(), item.detail.c_str(),
                item.seconds);
    std::fflush(stdout);
    if (!item.passed) ++failed;
  });
  if (items.empty())
    throw rfl::ConfigError("check --only: no invariant matches '" + filter +
                           "'");
  if (failed == 0) {
    std::printf("all %zu invariants pass\n", items.size());
    return kOk;
  }
  std::printf("%d of %zu invariants failed:\n", failed, items.size());
  for (const auto& item : items)
    if (!item.passed)
      std::printf("  %s: %s\n", item.module.c_str(), item.name.c_str());
  return kCheckFailed;
}

int run_fit(const std::string& path, const std::string& ycol,
            const std::string& xcol) {
  const rfl::CsvTable table = rfl::read_csv(path);
  const rfl::RateFit f = rfl::fit_rate(table.column(xcol), table.column(ycol));
  std::printf("slope,stderr,intercept,points\n%.17g,%.17g,%.17g,%d\n", f.slope,
              f.stderr_slope, f.intercept, f.points);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic-kernel discrepancy laboratory for BV flows"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (default: RFL_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.set_version_flag("--version", rfl::version());

  auto* catalog = app.add_subcommand("catalog", "List the catalog fields");

  std::string run_path;
  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("config", run_path, "Config file")->required();

  std::string sweep_path;
  auto* sweep =
      app.add_subcommand("sweep", "Run a scenario config and print its rates");
  sweep->add_option("config", sweep_path, "Config file")->required();

  bool fast = false, full = false;
  double normalization_scale = 1.0;
  std::string filter;
  auto* check = app.add_subcommand("check", "Run the invariant suite");
  auto* fast_flag = check->add_flag("--fast", fast, "Fast settings (default)");
  check->add_flag("--full", full, "Larger grids and sample counts")
      ->excludes(fast_flag);
  check
      ->add_option("--normalization-scale", normalization_scale,
                   "Multiply the kernel constant in the normalization "
                   "invariant (mutation test)")
      ->group("");
  check->add_option("--only", filter,
                    "Run invariants whose \"module: name\" contains TEXT");

  std::string fit_path, ycol, xcol;
  auto* fit = app.add_subcommand("fit", "Log-log rate of one CSV column");
  fit->add_option("csv", fit_path, "CSV file with a header row")->required();
  fit->add_option("ycol", ycol, "Ordinate column")->required();
  fit->add_option("xcol", xcol, "Abscissa column")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (threads == 0)
      if (const char* env = std::getenv("RFL_THREADS")) {
        try {
          threads = std::stoi(env);
        } catch (const std::exception&) {
          threads = -1;
        }
        if (threads <= 0)
          throw rfl::ConfigError(std::string("RFL_THREADS: expected a "
                                             "positive integer, got '") +
                                 env + "'");
      }
    if (threads > 0) rfl::set_thread_count(threads);

    if (*catalog) {
      rfl::write_catalog(std::cout);
      return kOk;
    }
    if (*run) return run_config(run_path, false);
    if (*sweep) return run_config(sweep_path, true);
    if (*check) return run_checks(full, normalization_scale, filter);
    if (*fit) return run_fit(fit_path, ycol, xcol);
  } catch (const rfl::ConfigError& e) {
    std::cerr << "rfl: " << e.what() << "\n";
    return kInvalid;
  } catch (const rfl::FitError& e) {
    std::cerr << "rfl: " << e.what() << "\n";
    return kInvalid;
  } catch (const rfl::InvalidInput& e) {
    std::cerr << "rfl: " << e.what() << "\n";
    return kInvalid;
  } catch (const rfl::Error& e) {
    std::cerr << "rfl: numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "rfl: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
