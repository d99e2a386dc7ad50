// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.
// Criterion numbers given as arguments restrict the run to those.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rfl/experiments.hpp"
#include "rfl/fields.hpp"
#include "rfl/flow.hpp"
#include "rfl/functionals.hpp"
#include "rfl/kernels.hpp"

using namespace rfl;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

FlowSolverConfig rk4(double h = 1e-3) {
  FlowSolverConfig c;
  c.h = h;
  return c;
}

FlowSolverConfig exact() {
  FlowSolverConfig c;
  c.method = SolverMethod::explicit_exact;
  return c;
}

Vec random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return v2(u(rng), u(rng));
}

Vec random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec v = v2(n(rng), n(rng));
  return v / v.norm();
}

BumpProfile smooth2() { return BumpProfile(ProfileKind::smooth_exp, 2); }

AnisotropicKernel tilted_kernel(double gamma) {
  return AnisotropicKernel(
      smooth2(), DirectionField::mollified_normal(v2(1, 0), 0.3), gamma);
}

FunctionalConfig config(double eps, double t, int n) {
  FunctionalConfig c;
  c.epsilon = eps;
  c.n_x = n;
  c.n_z = n;
  c.t = t;
  c.theta_nodes = 0;
  return c;
}

Outcome kernel_normalization() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int count = 0;
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {0.0, 1.0, 10.0, 100.0})
      for (int i = 0; i < 20; ++i) {
        const AnisotropicKernel k(
            BumpProfile(kind, 2),
            DirectionField::mollified_normal(random_unit(rng), 0.3, 0.1), gamma);
        const LocalKernel local = k.at(random_point(rng));
        const double mass = integrate(
            [&](const Vec& z) { return local.rho(z); }, local.z_grid(256));
        worst = std::max(worst, std::abs(mass - 1.0));
        ++count;
      }
  return {worst <= 1e-6,
          std::to_string(count) + " kernels, max |mass - 1| " + g(worst)};
}

Outcome step_one_identity() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {1.0, 10.0, 100.0})
      for (int i = 0; i < 20; ++i) {
        const AnisotropicKernel k(
            BumpProfile(kind, 2),
            DirectionField::mollified_normal(random_unit(rng), 0.4, 0.2), gamma);
        const LocalKernel local = k.at(random_point(rng));
        for (int j = 0; j < 2; ++j)
          worst = std::max(
              worst, std::abs(integrate(
                         [&](const Vec& z) { return local.d1_rho(z)[j]; },
                         local.z_grid(256))));
      }

  const double t = 0.2, dt = 1e-3;
  const FlowEnsemble ens = integrate_flow(
      catalog("A"), rk4(), 64, {0.0, t - dt, t, t + dt});
  auto X = std::make_shared<GridFlowMap>(catalog("A"), ens);
  const ShiftedFlowMap Y(X, v2(0.3, 0.0), Vec::Zero(2));
  const AnisotropicKernel k = tilted_kernel(10.0);
  std::vector<double> inv_eps, vals;
  std::string detail;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    inv_eps.push_back(1.0 / eps);
    vals.push_back(std::abs(I1(*X, Y, k, config(eps, t, 32))));
    detail += " " + g(vals.back());
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < vals.size(); ++i)
    decreasing = decreasing && vals[i] < vals[i - 1];
  const RateFit f = fit_rate(inv_eps, vals);
  return {worst <= 1e-6 && decreasing && f.slope < 0.0,
          "max |int d1 rho| " + g(worst) + "; |I1| on A" + detail +
              ", slope vs 1/eps " + g(f.slope) + " +- " + g(f.stderr_slope)};
}

Outcome r_a_identity() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  int count = 0;
  for (const char* id : {"A", "B", "C"})
    for (double gamma : {0.0, 10.0}) {
      const AnisotropicKernel k = tilted_kernel(gamma);
      for (int i = 0; i < 50;) {
        const Vec x = random_point(rng);
        if (catalog(id).jump_at(x) >= 0) continue;
        worst = std::max(worst, std::abs(R_a_check(catalog(id), k, x)));
        ++i;
        ++count;
      }
    }
  return {worst <= 1e-6,
          std::to_string(count) + " points, max |R_a| " + g(worst)};
}

Outcome singular_decay() {
  bool ok = true;
  std::string detail;
  for (const char* id : {"C", "D"}) {
    const auto& f = catalog(id);
    const auto eta = DirectionField::constant(f.jumps()[0].normal());
    std::vector<double> g1, vals;
    for (double gamma : {0.0, 1.0, 3.0, 9.0, 27.0, 81.0}) {
      g1.push_back(1.0 + gamma);
      vals.push_back(singular_bound(f, AnisotropicKernel(smooth2(), eta, gamma),
                                    1.0));
    }
    const RateFit fit = fit_rate(g1, vals);
    ok = ok && std::abs(fit.slope + 1.0) <= 0.05;
    detail += std::string(detail.empty() ? "" : ", ") + id + " slope " +
              g(fit.slope) + " +- " + g(fit.stderr_slope);
  }
  return {ok, detail};
}

Outcome scalar_products() {
  int samples = 0, violations = 0;
  double margin = INFINITY;
  for (const char* id : {"C", "D"}) {
    const ScalarBoundStats st = check_scalar_bounds(catalog(id), 10000, 105);
    samples += st.samples;
    violations += st.violations;
    margin = std::min(margin, st.worst_margin);
  }
  return {violations == 0, std::to_string(samples) + " samples, " +
                               std::to_string(violations) +
                               " violations, worst margin " + g(margin)};
}

Outcome decomposition() {
  const double t = 0.2, dt = 1e-3;
  const FlowEnsemble ens = integrate_flow(
      catalog("A"), rk4(), 128,
      {0.0, t - 2 * dt, t - dt, t, t + dt, t + 2 * dt});
  std::vector<std::shared_ptr<const FlowMap>> maps{
      std::make_shared<GridFlowMap>(catalog("A"), ens),
      std::make_shared<SolverFlowMap>(catalog("B"), exact()),
      std::make_shared<SolverFlowMap>(catalog("C"), exact())};
  int cases = 0, within = 0;
  double worst = 0.0;
  for (const auto& X : maps) {
    const ShiftedFlowMap Y(X, v2(0.3, 0.0), Vec::Zero(2));
    for (double eps : {0.1, 0.05})
      for (double gamma : {0.0, 10.0}) {
        const DiscrepancyReport r =
            discrepancy_report(*X, Y, tilted_kernel(gamma), config(eps, t, 64));
        const double gap = std::abs(r.I_eps_fd - (r.I1 + r.I2));
        worst = std::max(worst, gap / r.error_bound);
        ++cases;
        if (gap <= r.error_bound) ++within;
      }
  }
  return {within == cases, std::to_string(within) + "/" +
                               std::to_string(cases) +
                               " within the error bound, worst ratio " +
                               g(worst)};
}

Outcome gronwall_uniqueness() {
  const SolverFlowMap X(catalog("C"), exact());
  const SolverFlowMap Y(catalog("C"), rk4(1e-3));
  const AnisotropicKernel k(smooth2(), DirectionField::constant(v2(1, 0)), 0.0);
  const UniquenessReport r = uniqueness_report(X, Y, k, UniquenessConfig{});
  bool monotone = r.eqfin_residual.size() == 3;
  std::string res;
  for (std::size_t i = 0; i < r.eqfin_residual.size(); ++i) {
    if (i) monotone = monotone && r.eqfin_residual[i] < r.eqfin_residual[i - 1];
    res += " " + g(r.eqfin_residual[i]);
  }
  return {r.final_discrepancy <= 1e-5 && monotone &&
              r.verdict == Verdict::unique,
          to_string(r.verdict) + ", final discrepancy " +
              g(r.final_discrepancy) + ", eqfin residuals" + res};
}

Outcome hypothesis_violation() {
  const PiecewiseField& e = catalog("E");
  double dot = 0.0;
  for (const auto& j : e.jumps())
    dot = std::max(dot, std::abs(j.jump_direction().dot(j.normal())));
  FlowSolverConfig cfg = exact();
  cfg.sink = SinkPolicy::capture;
  const FlowEnsemble ens = integrate_flow(e, cfg, 128, {0.0, 0.4, 0.6});
  double lo = INFINITY, hi = 0.0;
  for (double t : {0.4, 0.6}) {
    const DensityField h = pushforward_histogram(ens, t, 32);
    lo = std::min(lo, h.min());
    hi = std::max(hi, h.max());
  }
  const double branches = branch_discrepancy(e, 0.3, 64);
  // Empty bins put the density below 1/C for every finite C.
  return {dot > 0.0 && lo == 0.0 && branches >= 0.1,
          "max |<xi_b, eta_b>| " + g(dot) + ", histogram range [" + g(lo) +
              ", " + g(hi) + "], branch discrepancy " + g(branches)};
}

Outcome trace_identity_bound() {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> n01;
  const BumpProfile p = smooth2();
  double margin = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    Mat m(2, 2);
    m << n01(rng), n01(rng), n01(rng), n01(rng);
    const TraceResult r = trace_identity(m, p, {0.0, 3.0}, 3, 256);
    margin = std::min(margin, r.min_margin);
  }
  Mat shear = Mat::Zero(2, 2);
  shear(1, 0) = 1.0;
  const TraceResult s = trace_identity(shear, p, {0.0, 1.0, 10.0, 100.0}, 8);
  return {margin >= -1e-8 && s.infimum <= 0.05 && s.best_gamma == 100.0,
          "1000 matrices, worst margin " + g(margin) + "; shear infimum " +
              g(s.infimum) + " at gamma " + g(s.best_gamma)};
}

Outcome flow_conformance() {
  const PiecewiseField& a = catalog("A");
  const FlowEnsemble ga = integrate_flow(a, rk4(1e-3), 16, {0.0, 0.2, 0.5});
  const double group = check_group_property(a, ga, 0.2, 0.3);
  double ode = 0.0;
  std::mt19937_64 rng(110);
  for (const char* id : {"A", "B", "C", "D"})
    for (int i = 0; i < 5; ++i) {
      const PiecewiseField& f = catalog(id);
      ode = std::max(ode, check_ode_residual(f, rk4(), random_point(rng), 1.0));
    }

  bool bands = true;
  std::string detail;
  for (const char* id : {"A", "C", "D"}) {
    const PiecewiseField& f = catalog(id);
    const auto cfg = f.piecewise_constant() ? exact() : rk4(1e-2);
    double prev = INFINITY;
    for (int m : {128, 256}) {
      const FlowEnsemble ens =
          integrate_flow(f, cfg, m, {-1.0, -0.5, 0.0, 0.5, 1.0});
      double delta = 0.0;
      for (double t : {-1.0, -0.5, 0.5, 1.0}) {
        const DensityField h = pushforward_histogram(ens, t, 8);
        delta = std::max({delta, h.max() - 1.0, 1.0 - h.min()});
      }
      bands = bands && delta <= prev + 1e-12;
      prev = delta;
    }
    bands = bands && prev <= 0.15;
    detail += std::string(" ") + id + " " + g(prev);
  }
  const FlowEnsemble b =
      integrate_flow(catalog("B"), exact(), 256, {-0.5, 0.0, 0.5});
  const double c = std::exp(kTwoPi * 0.5);
  for (double t : {-0.5, 0.5}) {
    const DensityField h = pushforward_histogram(b, t, 32);
    bands = bands && h.min() >= 1.0 / c - 0.1 && h.max() <= c + 0.1 * c;
  }
  return {group <= 1e-8 && ode <= 1e-5 && bands,
          "group defect " + g(group) + ", ODE residual " + g(ode) +
              ", band widths" + detail};
}

struct Criterion {
  int number;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  const std::vector<Criterion> criteria{
      {1, "kernel normalization", 10, kernel_normalization},
      {2, "step one identity and I1 decay", 60, step_one_identity},
      {3, "R_a identity", 60, r_a_identity},
      {4, "singular-bound decay", 120, singular_decay},
      {5, "scalar-product bounds", 30, scalar_products},
      {6, "decomposition cross-check", 300, decomposition},
      {7, "Gronwall uniqueness pipeline", 600, gronwall_uniqueness},
      {8, "hypothesis violation detected", 120, hypothesis_violation},
      {9, "trace identity", 120, trace_identity_bound},
      {10, "flow conformance", 180, flow_conformance},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    const bool in_time = seconds < c.budget_seconds;
    const bool passed = out.passed && in_time;
    if (!passed) ++failed;
    std::printf("criterion %2d %s  %s: %s; %.1f s of %.0f s\n", c.number,
                passed ? "PASS" : "FAIL", c.name, out.detail.c_str(), seconds,
                c.budget_seconds);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
