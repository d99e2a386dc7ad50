#include "rfl/checks.hpp"

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>
#include <sstream>

#include "rfl/config.hpp"
#include "rfl/csv.hpp"
#include "rfl/errors.hpp"
#include "rfl/experiments.hpp"
#include "rfl/fields.hpp"
#include "rfl/flow.hpp"
#include "rfl/functionals.hpp"
#include "rfl/kernels.hpp"
#include "rfl/parallel.hpp"

namespace rfl {
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

Vec random_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = u(rng);
  return v;
}

Vec random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n;
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = n(rng);
  return v / v.norm();
}

BumpProfile smooth2() { return BumpProfile(ProfileKind::smooth_exp, 2); }

AnisotropicKernel tilted_kernel(double gamma) {
  return AnisotropicKernel(
      smooth2(), DirectionField::mollified_normal(v2(1, 0), 0.3), gamma);
}

AnisotropicKernel iso_kernel() {
  return AnisotropicKernel(smooth2(), DirectionField::constant(v2(1, 0)), 0.0);
}

FunctionalConfig small_config(double eps, double t, int n) {
  FunctionalConfig c;
  c.epsilon = eps;
  c.n_x = n;
  c.n_z = n;
  c.t = t;
  c.theta_nodes = 0;
  return c;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  return fit_rate(x, y).slope;
}

std::vector<TestFunction> test_functions() {
  return {
      {[](const Vec& x) { return std::cos(kTwoPi * x[0]); },
       [](const Vec& x) {
         Vec d = Vec::Zero(x.size());
         d[0] = -kTwoPi * std::sin(kTwoPi * x[0]);
         return d;
       }},
      {[](const Vec& x) { return std::sin(kTwoPi * (x[0] + x[1])); },
       [](const Vec& x) {
         Vec d = Vec::Zero(x.size());
         d[0] = d[1] = kTwoPi * std::cos(kTwoPi * (x[0] + x[1]));
         return d;
       }},
      {[](const Vec& x) { return std::cos(kTwoPi * (2 * x[0] - x[1])); },
       [](const Vec& x) {
         Vec d = Vec::Zero(x.size());
         const double s = -kTwoPi * std::sin(kTwoPi * (2 * x[0] - x[1]));
         d[0] = 2 * s;
         d[1] = -s;
         return d;
       }},
      {[](const Vec& x) { return std::exp(std::sin(kTwoPi * x[1])); },
       [](const Vec& x) {
         Vec d = Vec::Zero(x.size());
         d[1] = kTwoPi * std::cos(kTwoPi * x[1]) *
                std::exp(std::sin(kTwoPi * x[1]));
         return d;
       }},
      {[](const Vec& x) {
         return std::sin(kTwoPi * x[0]) * std::cos(4 * kPi * x[1]);
       },
       [](const Vec& x) {
         Vec d = Vec::Zero(x.size());
         d[0] = kTwoPi * std::cos(kTwoPi * x[0]) * std::cos(4 * kPi * x[1]);
         d[1] = -4 * kPi * std::sin(kTwoPi * x[0]) * std::sin(4 * kPi * x[1]);
         return d;
       }},
  };
}

// torus

Outcome wrap_and_min_image(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const int samples = o.full ? 100000 : 10000;
  int bad = 0;
  for (int i = 0; i < samples; ++i) {
    const int dim = 2 + i % 2;
    Vec v(dim), w(dim);
    for (int k = 0; k < dim; ++k) {
      v[k] = u(rng);
      w[k] = u(rng);
    }
    const auto a = wrap(v), b = wrap(w);
    if (wrap(a.coords()).coords() != a.coords()) ++bad;
    const auto d = min_image(a, b), e = min_image(b, a);
    for (int k = 0; k < dim; ++k)
      if (d[k] < -0.5 || d[k] >= 0.5 ||
          std::abs(d[k] + e[k]) > 1e-12 * (1.0 + std::abs(d[k])))
        ++bad;
  }
  return {bad == 0, std::to_string(samples) + " pairs, " +
                        std::to_string(bad) + " violations"};
}

Outcome integrate_linear(const CheckOptions&) {
  const auto grid = QuadratureGrid::torus(2, 33);
  auto f = [](const Vec& x) { return std::exp(std::sin(kTwoPi * x[0])) * x[1]; };
  auto h = [](const Vec& x) { return std::cos(3.0 * x[0] + x[1]); };
  const double a = 2.5, b = -0.75;
  const double lhs =
      integrate([&](const Vec& x) { return a * f(x) + b * h(x); }, grid);
  const double rhs = a * integrate(f, grid) + b * integrate(h, grid);
  const double err = std::abs(lhs - rhs);
  return {err <= 1e-14 * std::abs(rhs) + 1e-15, "error " + g(err)};
}

Outcome refinement_monotone(const CheckOptions&) {
  auto f = [](const Vec& x) {
    return std::exp(std::cos(kTwoPi * x[0]) + 0.5 * std::sin(kTwoPi * x[1]));
  };
  double previous = INFINITY;
  bool ok = true;
  for (int n = 4; n <= 32; n *= 2) {
    const double gap = std::abs(integrate(f, QuadratureGrid::torus(2, n)) -
                                integrate(f, QuadratureGrid::torus(2, 2 * n)));
    if (n >= 8) ok = ok && gap <= previous;
    previous = gap;
  }
  return {ok && previous < 1e-13, "final gap " + g(previous)};
}

// fields

Outcome xi_orthogonal_eta(const CheckOptions&) {
  double worst = 0.0;
  for (const char* id : {"C", "D"})
    for (const auto& j : catalog(id).jumps())
      worst = std::max(worst, std::abs(j.jump_direction().dot(j.normal())));
  return {worst <= 1e-14, "max |<xi, eta>| " + g(worst)};
}

Outcome grad_a_second_order(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int per_field = o.full ? 100 : 20;
  int bad = 0;
  double worst = 0.0;
  for (int dim : {2, 3})
    for (const auto& id : catalog_ids()) {
      const auto f = make_field(id, dim);
      int tested = 0;
      while (tested < per_field) {
        Vec x(dim);
        for (int k = 0; k < dim; ++k) x[k] = u(rng);
        if (f.jump_at(x, 1e-2) >= 0) continue;
        ++tested;
        const Mat ex = f.grad_a(wrap(x));
        double errs[2];
        int idx = 0;
        for (double h : {1e-3, 5e-4}) {
          Mat fd(dim, dim);
          for (int jj = 0; jj < dim; ++jj) {
            const Vec e = h * unit_vector(dim, jj);
            fd.col(jj) =
                (f.value(wrap_vec(x + e)) - f.value(wrap_vec(x - e))) / (2 * h);
          }
          errs[idx++] = (fd - ex).norm();
        }
        worst = std::max(worst, errs[0]);
        if (errs[0] >= 1e-3 || !(errs[1] < 0.3 * errs[0] || errs[0] < 1e-9))
          ++bad;
      }
    }
  return {bad == 0, "max error at h=1e-3 " + g(worst) + ", " +
                        std::to_string(bad) + " points off second order"};
}

Outcome divergence_identity(const CheckOptions& o) {
  const int n = o.full ? 512 : 256;
  double worst = 0.0;
  const auto phis = test_functions();
  for (const auto& id : catalog_ids())
    for (const auto& phi : phis)
      worst = std::max(worst,
                       std::abs(distributional_divergence_check(catalog(id),
                                                                phi, n)));
  return {worst <= 1e-6, "max residual " + g(worst) + " at n=" +
                             std::to_string(n)};
}

Outcome rank_one(const CheckOptions&) {
  double worst = 0.0;
  for (const auto& id : catalog_ids())
    for (const auto& j : catalog(id).jumps()) {
      for (const auto& node : surface_nodes(j, 2, 8)) {
        const JumpData jd = catalog(id).jump_data(wrap(node.point));
        const Mat m = jd.xi * jd.eta.transpose();
        const Eigen::MatrixXd dense = m;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
        const auto s = svd.singularValues();
        if (s.size() > 1) worst = std::max(worst, s[1] / std::max(s[0], 1e-300));
      }
    }
  return {worst <= 1e-12, "max sigma2/sigma1 " + g(worst)};
}

// flow

Outcome backward_forward(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 2);
  double worst = 0.0;
  for (const char* id : {"A", "B", "C", "D"}) {
    const auto& f = catalog(id);
    for (int i = 0; i < 10; ++i) {
      const Vec x = random_point(rng, 2);
      const auto fwd = integrate_point(f, rk4(), x, 0.7);
      const auto bwd = integrate_point(f, rk4(), fwd.lifted, -0.7);
      worst = std::max(worst, torus_distance(wrap_vec(bwd.lifted), x));
    }
  }
  return {worst <= 1e-8, "max distance " + g(worst)};
}

Outcome total_mass(const CheckOptions& o) {
  const int m = o.full ? 48 : 24;
  double worst = 0.0;
  for (const char* id : {"A", "C", "D"}) {
    const auto& f = catalog(id);
    const auto ens = integrate_flow(f, f.piecewise_constant() ? exact() : rk4(),
                                    m, {-1.0, -0.5, 0.0, 0.5, 1.0});
    for (double t : {-1.0, -0.5, 0.5, 1.0})
      worst = std::max(worst, std::abs(density_from_flow(ens, t).mean() - 1.0));
  }
  IVec counts(2);
  counts << 16384, 1;
  const auto b = integrate_flow(catalog("B"), exact(), counts,
                                {-1.0, -0.5, 0.0, 0.5, 1.0});
  for (double t : {-1.0, -0.5, 0.5, 1.0})
    worst = std::max(worst, std::abs(density_from_flow(b, t).mean() - 1.0));
  return {worst <= 1e-6, "max |mass - 1| " + g(worst)};
}

Outcome incompressibility_bands(const CheckOptions& o) {
  const int bins = 8;
  const std::vector<int> ms = o.full ? std::vector<int>{128, 256, 512}
                                     : std::vector<int>{128, 256};
  bool ok = true;
  std::string detail;
  for (const char* id : {"A", "C", "D"}) {
    const auto& f = catalog(id);
    const auto cfg = f.piecewise_constant() ? exact() : rk4(1e-2);
    double prev = 1e9;
    for (int m : ms) {
      const auto ens = integrate_flow(f, cfg, m, {-1.0, -0.5, 0.0, 0.5, 1.0});
      double delta = 0.0;
      for (double t : {-1.0, -0.5, 0.5, 1.0}) {
        const auto h = pushforward_histogram(ens, t, bins);
        delta = std::max({delta, h.max() - 1.0, 1.0 - h.min()});
      }
      ok = ok && delta <= prev + 1e-12;
      prev = delta;
    }
    ok = ok && prev <= 0.15;
    detail += std::string(detail.empty() ? "" : ", ") + id + " " + g(prev);
  }
  const auto b = integrate_flow(catalog("B"), exact(), 256, {-0.5, 0.0, 0.5});
  const double c = std::exp(kTwoPi * 0.5);
  for (double t : {-0.5, 0.5}) {
    const auto h = pushforward_histogram(b, t, 32);
    ok = ok && h.min() >= 1.0 / c - 0.1 && h.max() <= 1.1 * c;
  }
  return {ok, "band width " + detail};
}

Outcome group_property(const CheckOptions&) {
  const auto& a = catalog("A");
  std::vector<double> hs{0.08, 0.04, 0.02, 0.01}, defects;
  for (double h : hs) {
    const auto e = integrate_flow(a, rk4(h), 8, {0.0, 0.23, 0.54});
    defects.push_back(check_group_property(a, e, 0.23, 0.31));
  }
  const double s = log_slope(hs, defects);
  const auto ea = integrate_flow(a, rk4(), 16, {0.0, 0.2, 0.5});
  const double d = check_group_property(a, ea, 0.2, 0.3);
  const auto ec = integrate_flow(catalog("C"), rk4(), 16, {0.0, 0.25, 0.5});
  const double c = check_group_property(catalog("C"), ec, 0.25, 0.25);
  return {s >= 3.8 && d <= 1e-8 && c <= 1e-10,
          "A defect " + g(d) + " at h=1e-3, order " + g(s) + ", C defect " +
              g(c)};
}

Outcome ode_residual(const CheckOptions&) {
  const double a = check_ode_residual(catalog("A"), rk4(), v2(0.1, 0.7), 1.0);
  const double c = check_ode_residual(catalog("C"), exact(), v2(0.25, 0.0), 0.5);
  return {a <= 1e-5 && c <= 1e-12, "A " + g(a) + ", C " + g(c)};
}

// kernels

Outcome normalization(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 3);
  const int per = o.full ? 20 : 5;
  double worst = 0.0;
  auto mass = [&](const BumpProfile& p, const DirectionField& eta,
                  double gamma, int dim, int n) {
    const BumpProfile patched(p.kind(), p.dim(),
                              p.normalization() * o.normalization_scale);
    const AnisotropicKernel k(patched, eta, gamma);
    const LocalKernel local = k.at(random_point(rng, dim));
    return integrate([&](const Vec& z) { return local.rho(z); },
                     local.z_grid(n));
  };
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {0.0, 1.0, 10.0, 100.0})
      for (int i = 0; i < per; ++i) {
        const double m = mass(
            BumpProfile(kind, 2),
            DirectionField::mollified_normal(random_unit(rng, 2), 0.3, 0.1),
            gamma, 2, 256);
        worst = std::max(worst, std::abs(m - 1.0));
      }
  for (double gamma : {0.0, 10.0}) {
    const double m =
        mass(BumpProfile(ProfileKind::smooth_exp, 3),
             DirectionField::constant(random_unit(rng, 3)), gamma, 3, 64);
    worst = std::max(worst, std::abs(m - 1.0));
  }
  return {worst <= 1e-6, "max |mass - 1| " + g(worst)};
}

Outcome d1_rho_mean_zero(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 4);
  double worst = 0.0;
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {1.0, 10.0, 100.0})
      for (int i = 0; i < (o.full ? 5 : 2); ++i) {
        const AnisotropicKernel k(
            BumpProfile(kind, 2),
            DirectionField::mollified_normal(random_unit(rng, 2), 0.4, 0.2),
            gamma);
        const LocalKernel local = k.at(random_point(rng, 2));
        for (int j = 0; j < 2; ++j)
          worst = std::max(
              worst, std::abs(integrate(
                         [&](const Vec& z) { return local.d1_rho(z)[j]; },
                         local.z_grid(256))));
      }
  return {worst <= 1e-6, "max |int d1 rho| " + g(worst)};
}

Outcome change_of_variables(const CheckOptions&) {
  const BumpProfile profile = smooth2();
  const Vec e = v2(std::cos(0.4), std::sin(0.4));
  const auto box = QuadratureGrid::box(v2(-1, -1), v2(1, 1), 2048);
  const double moment = radial_moment(profile, [](double r) { return r * r; });
  double worst = 0.0;
  for (double gamma : {1.0, 10.0}) {
    const AnisotropicKernel k(profile, DirectionField::constant(e), gamma);
    const Vec x0 = Vec::Zero(2);
    const Mat u = k.U(x0);
    const double mass =
        integrate([&](const Vec& z) { return k.rho(x0, z); }, box);
    const double second = integrate(
        [&](const Vec& z) { return k.rho(x0, z) * (u * z).squaredNorm(); },
        box);
    worst = std::max({worst, std::abs(mass - 1.0), std::abs(second - moment)});
  }
  return {worst <= 1e-4, "max deviation " + g(worst)};
}

Outcome scalar_bounds(const CheckOptions& o) {
  const int n = o.full ? 100000 : 10000;
  int violations = 0;
  double margin = INFINITY;
  for (const char* id : {"C", "D"}) {
    const auto st = check_scalar_bounds(catalog(id), n, o.seed + 5);
    violations += st.violations;
    margin = std::min(margin, st.worst_margin);
  }
  return {violations == 0 && margin >= 0.0,
          std::to_string(2 * n) + " samples, " + std::to_string(violations) +
              " violations, worst margin " + g(margin)};
}

// functionals

Outcome decomposition(const CheckOptions& o) {
  const double t = 0.2, dt = 1e-3;
  const int n = o.full ? 64 : 32;
  auto ens = std::make_shared<FlowEnsemble>(integrate_flow(
      catalog("A"), rk4(), o.full ? 128 : 64,
      {0.0, t - 2 * dt, t - dt, t, t + dt, t + 2 * dt}));
  std::vector<std::shared_ptr<const FlowMap>> maps{
      std::make_shared<GridFlowMap>(catalog("A"), *ens),
      std::make_shared<SolverFlowMap>(catalog("B"), exact()),
      std::make_shared<SolverFlowMap>(catalog("C"), exact())};
  int bad = 0, cases = 0;
  double worst = 0.0;
  for (const auto& X : maps) {
    const ShiftedFlowMap Y(X, v2(0.3, 0.0), Vec::Zero(2));
    for (double gamma : {0.0, 10.0}) {
      const auto r =
          discrepancy_report(*X, Y, tilted_kernel(gamma), small_config(0.1, t, n));
      const double gap = std::abs(r.I_eps_fd - (r.I1 + r.I2));
      worst = std::max(worst, gap / std::max(r.error_bound, 1e-300));
      ++cases;
      if (!(gap <= r.error_bound)) ++bad;
    }
  }
  return {bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) +
                        " within the error estimate, worst ratio " + g(worst)};
}

Outcome r_a_residual(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 6);
  double worst = 0.0;
  for (const char* id : {"A", "B", "C"})
    for (double gamma : {0.0, 10.0})
      for (int i = 0; i < (o.full ? 10 : 3); ++i) {
        const Vec x = random_point(rng, 2);
        if (catalog(id).jump_at(x) >= 0) continue;
        worst = std::max(worst,
                         std::abs(R_a_check(catalog(id), tilted_kernel(gamma), x)));
      }
  return {worst <= 1e-6, "max |R_a| " + g(worst)};
}

Outcome singular_scaling(const CheckOptions&) {
  bool ok = true;
  std::string detail;
  for (const char* id : {"C", "D"}) {
    const auto& f = catalog(id);
    const auto eta = DirectionField::constant(f.jumps()[0].normal());
    std::vector<double> g1, vals;
    for (double gm : {0.0, 1.0, 3.0, 9.0, 27.0, 81.0}) {
      const AnisotropicKernel k(smooth2(), eta, gm);
      g1.push_back(1.0 + gm);
      vals.push_back(singular_bound(f, k, 1.0));
      ok = ok && vals.back() <= singular_bound_majorant(f, k, 1.0);
    }
    const double s = log_slope(g1, vals);
    ok = ok && std::abs(s + 1.0) <= 1e-6;
    detail += std::string(detail.empty() ? "slope " : ", ") + id + " " +
              format_real(s);
  }
  return {ok, detail};
}

Outcome trace_bound(const CheckOptions& o) {
  std::mt19937_64 rng(o.seed + 7);
  std::normal_distribution<double> n01;
  const BumpProfile p = smooth2();
  const int count = o.full ? 1000 : 50;
  double margin = INFINITY, identity = 0.0;
  for (int i = 0; i < count; ++i) {
    Mat m(2, 2);
    m << n01(rng), n01(rng), n01(rng), n01(rng);
    const TraceResult r = trace_identity(m, p, {0.0, 3.0}, 3, 256);
    margin = std::min(margin, r.min_margin);
    identity = std::max(identity, r.max_identity_error / (1.0 + m.norm()));
  }
  return {margin >= -1e-8 && identity <= 1e-9,
          std::to_string(count) + " matrices, worst margin " + g(margin) +
              ", identity error " + g(identity)};
}

Outcome eqfin_decreases(const CheckOptions&) {
  auto X = std::make_shared<SolverFlowMap>(catalog("B"), exact());
  const ShiftedFlowMap Y(X, v2(0.0, 0.3), v2(0.0, 0.2));
  std::vector<double> res;
  for (double eps : {0.1, 0.05, 0.025}) {
    FunctionalConfig c = small_config(eps, 0.3, 32);
    c.n_z = 16;
    res.push_back(
        discrepancy_report(*X, Y, iso_kernel(), c, {0.0, false}).eqfin_residual);
  }
  return {res[1] < res[0] && res[2] < res[1],
          "residuals " + g(res[0]) + " " + g(res[1]) + " " + g(res[2])};
}

Outcome compressive_violations(const CheckOptions&) {
  const auto& e = catalog("E");
  double worst_dot = 0.0;
  for (const auto& j : e.jumps())
    worst_dot = std::max(worst_dot, std::abs(j.jump_direction().dot(j.normal())));
  FlowSolverConfig cfg = exact();
  cfg.sink = SinkPolicy::capture;
  const auto ens = integrate_flow(e, cfg, 128, {0.0, 0.6});
  const auto h = pushforward_histogram(ens, 0.6, 32);
  const SolverFlowMap X(e, exact());
  const auto r = uniqueness_report(X, X, iso_kernel(), {});
  const double d = branch_discrepancy(e, 0.3, 64);
  // An empty bin is below 1/C for every finite C.
  const bool ok = worst_dot > 0.5 && h.min() == 0.0 &&
                  r.verdict == Verdict::hypotheses_violated && d >= 0.1;
  return {ok, "max |<xi, eta>| " + g(worst_dot) + ", histogram range [" +
                  g(h.min()) + ", " + g(h.max()) + "], " + to_string(r.verdict) +
                  ", branch distance " + g(d)};
}

Outcome uniqueness_shear(const CheckOptions& o) {
  const SolverFlowMap X(catalog("C"), exact());
  const SolverFlowMap Y(catalog("C"), rk4(o.full ? 1e-3 : 1e-2));
  UniquenessConfig u;
  if (!o.full) {
    u.n_x = 32;
    u.levels = {{0.1, 16, 12}, {0.05, 32, 16}, {0.025, 64, 16}};
  }
  const auto r = uniqueness_report(X, Y, iso_kernel(), u);
  bool monotone = true;
  for (std::size_t i = 1; i < r.eqfin_residual.size(); ++i)
    monotone = monotone && r.eqfin_residual[i] < r.eqfin_residual[i - 1];
  return {r.verdict == Verdict::unique && monotone,
          to_string(r.verdict) + ", final discrepancy " +
              g(r.final_discrepancy)};
}

// experiments

ScenarioConfig tiny_scenario() {
  ScenarioConfig c;
  c.field_id = "B";
  c.solver.method = SolverMethod::explicit_exact;
  c.pair_pre = v2(0.0, 0.3);
  c.pair_post = Vec::Zero(2);
  c.epsilons = {0.1};
  c.gammas = {3.0};
  c.times = {0.2};
  c.n_x = 16;
  c.n_z = 16;
  c.eta = EtaKind::mollified_normal;
  c.eta_vector = v2(1.0, 0.0);
  return c;
}

Outcome thread_reproducibility(const CheckOptions&) {
  const ScenarioConfig c = tiny_scenario();
  const int saved = thread_count();
  set_thread_count(1);
  const auto a = run_scenario(c);
  set_thread_count(4);
  const auto b = run_scenario(c);
  set_thread_count(saved);
  std::ostringstream sa, sb;
  write_report_csv(a.reports, sa);
  write_report_csv(b.reports, sb);
  return {sa.str() == sb.str(), "report.csv identical for 1 and 4 threads"};
}

Outcome meta_round_trip(const CheckOptions&) {
  const ScenarioConfig c = tiny_scenario();
  std::ostringstream out;
  write_meta(c, 1.5, out);
  std::istringstream in(out.str());
  const ScenarioConfig back =
      ScenarioConfig::from(KeyValues::parse(in, "meta"));
  return {back == c, "config echo parses back to an equal config"};
}

Outcome fit_square(const CheckOptions&) {
  std::vector<double> x, y;
  for (int i = 1; i <= 8; ++i) {
    x.push_back(0.5 * i);
    y.push_back(0.25 * i * i);
  }
  const RateFit f = fit_rate(x, y);
  return {std::abs(f.slope - 2.0) <= 1e-12, "slope " + format_real(f.slope)};
}

struct Entry {
  const char* module;
  const char* name;
  Outcome (*run)(const CheckOptions&);
};

const Entry kEntries[] = {
    {"torus", "wrap idempotent, min_image antisymmetric", wrap_and_min_image},
    {"torus", "integrate is linear", integrate_linear},
    {"torus", "refinement converges monotonically", refinement_monotone},
    {"fields", "xi orthogonal to eta on bv jumps", xi_orthogonal_eta},
    {"fields", "grad_a second-order finite differences", grad_a_second_order},
    {"fields", "distributional divergence identity", divergence_identity},
    {"fields", "xi (x) eta is rank one", rank_one},
    {"flow", "backward-forward consistency", backward_forward},
    {"flow", "total mass of the density", total_mass},
    {"flow", "near-incompressibility bands", incompressibility_bands},
    {"flow", "group property defect order", group_property},
    {"flow", "ODE residual", ode_residual},
    {"kernels", "normalization", normalization},
    {"kernels", "d1 rho integrates to zero", d1_rho_mean_zero},
    {"kernels", "change of variables", change_of_variables},
    {"kernels", "scalar-product bounds", scalar_bounds},
    {"functionals", "finite difference decomposition", decomposition},
    {"functionals", "R_a residual", r_a_residual},
    {"functionals", "singular bound scaling", singular_scaling},
    {"functionals", "trace lower bound", trace_bound},
    {"functionals", "eqfin residual decreases", eqfin_decreases},
    {"functionals", "compressive field violates hypotheses",
     compressive_violations},
    {"functionals", "uniqueness on the shear", uniqueness_shear},
    {"experiments", "thread-count reproducibility", thread_reproducibility},
    {"experiments", "meta round trip", meta_round_trip},
    {"experiments", "rate fit of a square", fit_square},
};

}  // namespace

std::vector<CheckItem> run_checks(
    const CheckOptions& options,
    const std::function<void(const CheckItem&)>& on_done) {
  std::vector<CheckItem> items;
  for (const Entry& e : kEntries) {
    const std::string label = std::string(e.module) + ": " + e.name;
    if (label.find(options.filter) == std::string::npos) continue;
    CheckItem item;
    item.module = e.module;
    item.name = e.name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Outcome out = e.run(options);
      item.passed = out.passed;
      item.detail = out.detail;
    } catch (const std::exception& ex) {
      item.passed = false;
      item.detail = std::string("threw: ") + ex.what();
    }
    item.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    if (on_done) on_done(item);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace rfl
