#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "rfl/csv.hpp"
#include "rfl/errors.hpp"
#include "rfl/functionals.hpp"
#include "rfl/parallel.hpp"

using namespace rfl;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

FlowSolverConfig exact() {
  FlowSolverConfig c;
  c.method = SolverMethod::explicit_exact;
  return c;
}

BumpProfile smooth2() { return BumpProfile(ProfileKind::smooth_exp, 2); }

AnisotropicKernel iso_kernel() {
  return AnisotropicKernel(smooth2(), DirectionField::constant(v2(1, 0)), 0.0);
}

AnisotropicKernel tilted_kernel(double gamma) {
  return AnisotropicKernel(
      smooth2(), DirectionField::mollified_normal(v2(1, 0), 0.3), gamma);
}

FunctionalConfig small_config(double eps, double t, int n = 32) {
  FunctionalConfig c;
  c.epsilon = eps;
  c.n_x = n;
  c.n_z = n;
  c.t = t;
  c.theta_nodes = 0;
  return c;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

// Ensemble of field A at t and its finite-difference neighbours.
const FlowEnsemble& ensemble_a(double t) {
  static const FlowEnsemble ens = [&] {
    FlowSolverConfig c;
    c.h = 1e-3;
    const double dt = 1e-3;
    return integrate_flow(catalog("A"), c, 64,
                          {0.0, t - 2 * dt, t - dt, t, t + dt, t + 2 * dt});
  }();
  return ens;
}

}  // namespace

TEST_CASE("functional config validation names the key") {
  const AnisotropicKernel k = iso_kernel();
  FunctionalConfig c;
  CHECK_NOTHROW(c.validate(k));
  c.epsilon = 0.6;
  try {
    c.validate(k);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("functional.epsilon") != std::string::npos);
  }
  c = FunctionalConfig{};
  c.n_z = 1;
  CHECK_THROWS_AS(c.validate(k), ConfigError);
  c = FunctionalConfig{};
  c.dt_fd = 0.0;
  CHECK_THROWS_AS(c.validate(k), ConfigError);
}

TEST_CASE("D at t = 0 for identical flows is epsilon times the first moment") {
  const SolverFlowMap X(catalog("C"), exact());
  const AnisotropicKernel k = iso_kernel();
  FunctionalConfig c = small_config(0.05, 0.0, 8);
  c.n_z = 64;
  const double oracle =
      0.05 * radial_moment(k.profile(), [](double r) { return r; });
  CHECK(discrepancy_D(X, X, k, c, 0.0) == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("identical shear flows have vanishing I_eps at t = 0") {
  const SolverFlowMap X(catalog("C"), exact());
  const FunctionalConfig c = small_config(0.05, 0.0);
  CHECK(std::abs(I_eps_fd(X, X, iso_kernel(), c)) <= 1e-4);
  CHECK(std::abs(I_eps_fd(X, X, tilted_kernel(10.0), c)) <= 1e-4);
}

TEST_CASE("finite difference matches I1 + I2 within the error estimate") {
  const double t = 0.2;
  const Vec pre = v2(0.3, 0.0), zero = Vec::Zero(2);
  std::vector<std::shared_ptr<const FlowMap>> maps{
      std::make_shared<GridFlowMap>(catalog("A"), ensemble_a(t)),
      std::make_shared<SolverFlowMap>(catalog("B"), exact()),
      std::make_shared<SolverFlowMap>(catalog("C"), exact())};
  for (const auto& X : maps) {
    const ShiftedFlowMap Y(X, pre, zero);
    for (double gamma : {0.0, 10.0}) {
      CAPTURE(X->field().id());
      CAPTURE(gamma);
      const DiscrepancyReport r =
          discrepancy_report(*X, Y, tilted_kernel(gamma), small_config(0.1, t));
      CHECK(r.error_bound > 0.0);
      CHECK(std::abs(r.I_eps_fd - (r.I1 + r.I2)) <= r.error_bound);
    }
  }
}

TEST_CASE("I1 vanishes for a constant direction field") {
  const double t = 0.2;
  auto X = std::make_shared<GridFlowMap>(catalog("A"), ensemble_a(t));
  const ShiftedFlowMap Y(X, v2(0.3, 0.0), Vec::Zero(2));
  const AnisotropicKernel k(smooth2(), DirectionField::constant(v2(0.6, 0.8)),
                            10.0);
  CHECK(I1(*X, Y, k, small_config(0.1, t, 16)) == 0.0);
}

TEST_CASE("I1 decays as epsilon shrinks") {
  const double t = 0.2;
  auto X = std::make_shared<GridFlowMap>(catalog("A"), ensemble_a(t));
  const ShiftedFlowMap Y(X, v2(0.3, 0.0), Vec::Zero(2));
  const AnisotropicKernel k = tilted_kernel(10.0);
  std::vector<double> inv_eps, vals;
  for (double eps : {0.1, 0.05, 0.025}) {
    inv_eps.push_back(1.0 / eps);
    vals.push_back(std::abs(I1(*X, Y, k, small_config(eps, t))));
  }
  CHECK(vals[1] < vals[0]);
  CHECK(vals[2] < vals[1]);
  CHECK(fit_slope(inv_eps, vals) < -1.0);
}

TEST_CASE("segment-averaged I2 agrees with the difference quotient") {
  auto X = std::make_shared<SolverFlowMap>(catalog("B"), exact());
  const ShiftedFlowMap Y(X, v2(0.0, 0.3), v2(0.0, 0.2));
  FunctionalConfig c = small_config(0.05, 0.3, 16);
  c.theta_nodes = 8;
  const FunctionalTerms f = functional_terms(*X, Y, iso_kernel(), c);
  CHECK(f.I2 == doctest::Approx(f.I2_a).epsilon(1e-8));
}

TEST_CASE("eqfin residual decreases under refinement on field B") {
  auto X = std::make_shared<SolverFlowMap>(catalog("B"), exact());
  // b does not depend on x2, so the shift keeps Y a flow of b.
  const ShiftedFlowMap Y(X, v2(0.0, 0.3), v2(0.0, 0.2));
  std::vector<double> res;
  for (double eps : {0.1, 0.05, 0.025}) {
    FunctionalConfig c = small_config(eps, 0.3);
    c.n_z = 16;
    res.push_back(
        discrepancy_report(*X, Y, iso_kernel(), c, {0.0, false}).eqfin_residual);
  }
  CHECK(res[1] < res[0]);
  CHECK(res[2] < res[1]);
}

TEST_CASE("R_a residual vanishes on smooth pieces") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const char* id : {"A", "B", "C"}) {
    const PiecewiseField& f = catalog(id);
    for (double gamma : {0.0, 10.0}) {
      const AnisotropicKernel k = tilted_kernel(gamma);
      for (int i = 0; i < 10; ++i) {
        Vec x = v2(u(rng), u(rng));
        if (f.jump_at(x) >= 0) continue;
        CAPTURE(id);
        CHECK(std::abs(R_a_check(f, k, x)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("R_a check refuses points on a jump") {
  CHECK_THROWS_AS(R_a_check(catalog("C"), iso_kernel(), v2(0.5, 0.3)),
                  OnJumpError);
}

TEST_CASE("aligned singular bound scales exactly like 1/(1+gamma)") {
  for (const char* id : {"C", "D"}) {
    const PiecewiseField& f = catalog(id);
    const DirectionField eta = DirectionField::constant(f.jumps()[0].normal());
    std::vector<double> g1, vals;
    for (double g : {0.0, 1.0, 3.0, 9.0, 27.0, 81.0}) {
      const AnisotropicKernel k(smooth2(), eta, g);
      g1.push_back(1.0 + g);
      vals.push_back(singular_bound(f, k, 1.0));
      CHECK(vals.back() <= singular_bound_majorant(f, k, 1.0));
    }
    CAPTURE(id);
    CHECK(fit_slope(g1, vals) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(misalignment_mass(f, eta) == doctest::Approx(0.0));
  }
}

TEST_CASE("singular bound stays below its majorant when misaligned") {
  const PiecewiseField& f = catalog("C");
  for (double g : {0.0, 5.0, 50.0}) {
    const AnisotropicKernel k(
        smooth2(), DirectionField::mollified_normal(v2(1, 0), 0.1, 0.2), g);
    CAPTURE(g);
    CHECK(singular_bound(f, k, 1.5) <= singular_bound_majorant(f, k, 1.5));
  }
}

TEST_CASE("singular bound is zero for a kernel-free field") {
  const SolverFlowMap X(catalog("B"), exact());
  const DiscrepancyReport r = discrepancy_report(
      X, X, iso_kernel(), small_config(0.1, 0.1, 8), {0.0, false});
  CHECK(r.singular_bound == 0.0);
}

TEST_CASE("scalar-product bounds have no violations") {
  for (const char* id : {"C", "D"}) {
    const ScalarBoundStats st = check_scalar_bounds(catalog(id), 10000, 11);
    CHECK(st.samples == 10000);
    CHECK(st.violations == 0);
    CHECK(st.worst_margin >= 0.0);
  }
  CHECK_THROWS_AS(check_scalar_bounds(catalog("A"), 10, 1), InvalidInput);
}

TEST_CASE("gamma-eta tradeoff") {
  const PiecewiseField& f = catalog("C");
  const double mass = f.singular_mass();
  const TradeoffTable t =
      gamma_eta_tradeoff(f, {0.0, 1.0, 10.0, 100.0}, {0.0, 0.01, 0.1});
  CHECK(t.grid.size() == 12);
  CHECK(t.best.gamma == 100.0);
  CHECK(t.best.delta == 0.0);
  CHECK(t.best.envelope == doctest::Approx(1.0 / 101.0));
  REQUIRE(t.diagonal.size() == 100);
  for (std::size_t i = 0; i < t.diagonal.size(); ++i) {
    const double k = i + 1.0;
    CHECK(t.diagonal[i] <= (1.0 + 3.0 * mass) / k + 1e-15);
  }
  CHECK(t.diagonal.back() < t.diagonal.front());
}

TEST_CASE("trace identity examples") {
  const BumpProfile p = smooth2();
  const TraceResult zero = trace_identity(Mat::Zero(2, 2), p, {0.0}, 1);
  CHECK(zero.infimum == 0.0);
  const TraceResult id = trace_identity(Mat::Identity(2, 2), p, {0.0}, 1);
  CHECK(id.infimum == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(id.max_identity_error <= 1e-4);

  Mat shear = Mat::Zero(2, 2);
  shear(1, 0) = 1.0;  // xi = e2, eta = e1
  const TraceResult s = trace_identity(shear, p, {0.0, 1.0, 10.0, 100.0}, 8);
  CHECK(s.trace == 0.0);
  CHECK(s.infimum <= 0.05);
  CHECK(s.best_gamma == 100.0);
  CHECK(std::abs(s.best_eta[0]) == doctest::Approx(1.0));
}

TEST_CASE("trace lower bound holds for random matrices") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const BumpProfile p = smooth2();
  double worst = 1.0;
  for (int i = 0; i < 20; ++i) {
    Mat m(2, 2);
    m << g(rng), g(rng), g(rng), g(rng);
    const TraceResult r = trace_identity(m, p, {0.0, 3.0}, 3, 256);
    worst = std::min(worst, r.min_margin);
    CHECK(r.max_identity_error <= 1e-9 * (1.0 + m.norm()));
  }
  CHECK(worst >= -1e-8);
}

TEST_CASE("trace identity in three dimensions") {
  const BumpProfile p(ProfileKind::smooth_exp, 3);
  const TraceResult r = trace_identity(Mat::Identity(3, 3), p, {0.0, 2.0}, 4, 64);
  CHECK(r.infimum == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(r.max_identity_error <= 1e-5);
  CHECK(r.min_margin >= -1e-5);
  CHECK_THROWS_AS(trace_identity(Mat::Identity(2, 2), p, {0.0}, 1),
                  InvalidInput);
}

TEST_CASE("uniqueness: two solvers on the shear agree") {
  FlowSolverConfig rk;
  rk.h = 1e-2;
  const SolverFlowMap X(catalog("C"), exact()), Y(catalog("C"), rk);
  UniquenessConfig u;
  u.n_x = 32;
  u.levels = {{0.1, 16, 12}, {0.05, 32, 16}, {0.025, 64, 16}};
  const UniquenessReport r = uniqueness_report(X, Y, iso_kernel(), u);
  CHECK(r.verdict == Verdict::unique);
  CHECK(r.final_discrepancy <= 1e-5);
  CHECK(r.discrepancy.front() == 0.0);
  REQUIRE(r.eqfin_residual.size() == 3);
  CHECK(r.eqfin_residual[1] < r.eqfin_residual[0]);
  CHECK(r.eqfin_residual[2] < r.eqfin_residual[1]);
  CHECK(r.rows.size() == 9);
  CHECK(r.gronwall_bound >= r.final_discrepancy);
}

TEST_CASE("uniqueness: shifted initial data is not unique") {
  auto X = std::make_shared<SolverFlowMap>(catalog("C"), exact());
  const ShiftedFlowMap Y(X, v2(0.0, 0.1), Vec::Zero(2));
  UniquenessConfig u;
  u.n_x = 16;
  u.levels = {{0.1, 8, 8}};
  const UniquenessReport r = uniqueness_report(*X, Y, iso_kernel(), u);
  CHECK(r.verdict == Verdict::not_unique);
  CHECK(r.discrepancy.front() == doctest::Approx(0.1));
}

TEST_CASE("uniqueness: singular divergence is reported, not judged") {
  const SolverFlowMap X(catalog("E"), exact());
  const UniquenessReport r = uniqueness_report(X, X, iso_kernel(), {});
  CHECK(r.verdict == Verdict::hypotheses_violated);
  CHECK(r.rows.empty());
  CHECK(r.reason.find("field E") != std::string::npos);
  CHECK(to_string(r.verdict) == "HYPOTHESES_VIOLATED");
}

TEST_CASE("backward branches of the compressive field stay apart") {
  const double d = branch_discrepancy(catalog("E"), 0.3, 64);
  CHECK(d >= 0.1);
  // Captured points (fraction 0.6) land 0.4 apart; the rest coincide.
  CHECK(d == doctest::Approx(0.24).epsilon(0.05));
}

TEST_CASE("report rows are full precision") {
  const SolverFlowMap X(catalog("C"), exact());
  const DiscrepancyReport r = discrepancy_report(
      X, X, iso_kernel(), small_config(0.1, 0.2, 8), {0.0, true});
  const auto row = report_csv_row(r);
  REQUIRE(row.size() == report_csv_header().size());
  CHECK(row[0] == "C");
  CHECK(std::stod(row[report_csv_header().size() - 1]) == r.error_bound);
  CHECK(format_real(0.1) == "0.10000000000000001");
}

TEST_CASE("reports are identical for any thread count") {
  const SolverFlowMap X(catalog("B"), exact());
  auto run = [&] {
    return discrepancy_report(X, X, tilted_kernel(3.0),
                              small_config(0.1, 0.2, 16));
  };
  const int saved = thread_count();
  set_thread_count(1);
  const DiscrepancyReport a = run();
  set_thread_count(4);
  const DiscrepancyReport b = run();
  set_thread_count(saved);
  CHECK(report_csv_row(a) == report_csv_row(b));
}
