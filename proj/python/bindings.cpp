#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rfl/checks.hpp"
#include "rfl/config.hpp"
#include "rfl/errors.hpp"
#include "rfl/experiments.hpp"
#include "rfl/fields.hpp"
#include "rfl/functionals.hpp"
#include "rfl/kernels.hpp"
#include "rfl/parallel.hpp"

namespace py = pybind11;

namespace {

std::vector<double> to_list(const rfl::Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

rfl::Vec to_vec(const std::vector<double>& v) {
  if (v.empty() || v.size() > 3)
    throw rfl::InvalidInput("expected a vector of length 1 to 3");
  rfl::Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

py::dict report_dict(const rfl::DiscrepancyReport& r) {
  py::dict d;
  d["field"] = r.field_id;
  d["epsilon"] = r.epsilon;
  d["gamma"] = r.gamma;
  d["t"] = r.t;
  d["n_x"] = r.n_x;
  d["n_z"] = r.n_z;
  d["D"] = r.D;
  d["I_eps_fd"] = r.I_eps_fd;
  d["I1"] = r.I1;
  d["I2"] = r.I2;
  d["I2_a_limit"] = r.I2_a_limit;
  d["singular_bound"] = r.singular_bound;
  d["eqfin_residual"] = r.eqfin_residual;
  d["error_bound"] = r.error_bound;
  return d;
}

py::dict fit_dict(const rfl::RateFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["stderr"] = f.stderr_slope;
  d["intercept"] = f.intercept;
  d["points"] = f.points;
  return d;
}

rfl::ScenarioConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  rfl::ScenarioConfig c =
      rfl::ScenarioConfig::from(rfl::KeyValues::parse(in, "<string>"));
  c.validate();
  return c;
}

py::dict run(const std::string& text, bool write) {
  const rfl::ScenarioConfig config = parse_config(text);
  rfl::ScenarioResult result;
  {
    py::gil_scoped_release release;
    result = rfl::run_scenario(config);
    if (write) rfl::write_outputs(config, result);
  }
  py::list reports, fits;
  for (const auto& r : result.reports) reports.append(report_dict(r));
  for (const auto& f : result.fits) {
    py::dict d = fit_dict(f.fit);
    d["quantity"] = f.quantity;
    d["abscissa"] = f.abscissa;
    d["status"] = f.status;
    fits.append(d);
  }
  py::dict out;
  out["reports"] = reports;
  out["fits"] = fits;
  out["wall_seconds"] = result.wall_seconds;
  if (result.has_uniqueness) {
    const auto& u = result.uniqueness;
    py::dict d;
    d["verdict"] = rfl::to_string(u.verdict);
    d["times"] = u.times;
    d["discrepancy"] = u.discrepancy;
    d["eqfin_residual"] = u.eqfin_residual;
    d["gronwall_bound"] = u.gronwall_bound;
    d["final_discrepancy"] = u.final_discrepancy;
    d["reason"] = u.reason;
    out["uniqueness"] = d;
  } else {
    out["uniqueness"] = py::none();
  }
  return out;
}

py::list catalog() {
  py::list out;
  for (const auto& id : rfl::catalog_ids()) {
    const auto& f = rfl::catalog(id);
    py::list jumps;
    for (const auto& j : f.jumps()) {
      py::dict d;
      d["eta_b"] = to_list(j.normal());
      d["xi_b"] = to_list(j.jump_direction());
      d["sigma"] = j.density();
      jumps.append(d);
    }
    py::dict d;
    d["id"] = id;
    d["classification"] = rfl::to_string(f.classification());
    d["description"] = f.description();
    d["singular_mass"] = f.singular_mass();
    d["jumps"] = jumps;
    out.append(d);
  }
  return out;
}

double kernel_mass(const std::string& profile, double gamma,
                   const std::vector<double>& eta, const std::vector<double>& x,
                   int n_z) {
  const rfl::Vec e = to_vec(eta);
  const rfl::AnisotropicKernel k(
      rfl::BumpProfile(rfl::parse_profile(profile), static_cast<int>(e.size())),
      rfl::DirectionField::constant(e / e.norm()), gamma);
  const rfl::LocalKernel local = k.at(to_vec(x));
  py::gil_scoped_release release;
  return rfl::integrate([&](const rfl::Vec& z) { return local.rho(z); },
                        local.z_grid(n_z));
}

py::dict trace(const std::vector<std::vector<double>>& rows,
               const std::vector<double>& gammas, int angles, int n_z) {
  const int dim = static_cast<int>(rows.size());
  if (dim < 2 || dim > 3) throw rfl::InvalidInput("matrix must be 2x2 or 3x3");
  rfl::Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    if (static_cast<int>(rows[i].size()) != dim)
      throw rfl::InvalidInput("matrix must be square");
    for (int j = 0; j < dim; ++j) m(i, j) = rows[i][j];
  }
  rfl::TraceResult r;
  {
    py::gil_scoped_release release;
    r = rfl::trace_identity(m, rfl::BumpProfile(rfl::ProfileKind::smooth_exp, dim),
                            gammas, angles, n_z);
  }
  py::dict d;
  d["trace"] = r.trace;
  d["infimum"] = r.infimum;
  d["best_gamma"] = r.best_gamma;
  d["best_eta"] = to_list(r.best_eta);
  d["min_margin"] = r.min_margin;
  d["max_identity_error"] = r.max_identity_error;
  return d;
}

py::list check(bool full, const std::string& filter) {
  rfl::CheckOptions o;
  o.full = full;
  o.filter = filter;
  std::vector<rfl::CheckItem> items;
  {
    py::gil_scoped_release release;
    items = rfl::run_checks(o);
  }
  py::list out;
  for (const auto& item : items) {
    py::dict d;
    d["module"] = item.module;
    d["name"] = item.name;
    d["passed"] = item.passed;
    d["detail"] = item.detail;
    d["seconds"] = item.seconds;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_rfl, m) {
  m.doc() = "Anisotropic-kernel discrepancy laboratory";

  // Later registrations are tried first, so the base class goes first.
  py::register_exception<rfl::Error>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<rfl::InvalidInput>(m, "InvalidInput",
                                            PyExc_ValueError);
  py::register_exception<rfl::FitError>(m, "FitError", PyExc_ValueError);
  py::register_exception<rfl::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("version", &rfl::version);
  m.def("thread_count", &rfl::thread_count);
  m.def("set_thread_count", &rfl::set_thread_count, py::arg("n"));
  m.def("catalog", &catalog, "Catalog fields with their jump data.");
  m.def("fit_rate",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          return fit_dict(rfl::fit_rate(x, y));
        },
        py::arg("x"), py::arg("y"), "Log-log least-squares slope.");
  m.def("run", &run, py::arg("config"), py::arg("write") = false,
        "Runs a scenario given as key = value text.");
  m.def("kernel_mass", &kernel_mass, py::arg("profile"), py::arg("gamma"),
        py::arg("eta"), py::arg("x"), py::arg("n_z") = 256);
  m.def("trace_identity", &trace, py::arg("matrix"), py::arg("gammas"),
        py::arg("angles"), py::arg("n_z") = 128);
  m.def("check", &check, py::arg("full") = false, py::arg("filter") = "",
        "Runs the invariant suite and returns one dict per invariant.");
}
