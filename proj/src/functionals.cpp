#include "rfl/functionals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "rfl/csv.hpp"
#include "rfl/errors.hpp"
#include "rfl/parallel.hpp"

namespace rfl {

void FunctionalConfig::validate(const AnisotropicKernel& kernel) const {
  if (!(epsilon > 0.0))
    throw ConfigError("functional.epsilon: must be positive");
  if (epsilon * kernel.support_bounds().second >= 0.5)
    throw ConfigError(
        "functional.epsilon: scaled kernel support must fit the torus "
        "(epsilon * outer radius < 1/2)");
  if (n_x < 2) throw ConfigError("functional.n_x: must be >= 2");
  if (n_z < 2) throw ConfigError("functional.n_z: must be >= 2");
  if (theta_nodes < 0) throw ConfigError("functional.theta_nodes: must be >= 0");
  if (!(dt_fd > 0.0)) throw ConfigError("functional.dt_fd: must be positive");
  if (!std::isfinite(t)) throw ConfigError("functional.t: must be finite");
}

namespace {

constexpr int kMaxTimes = 8;
enum Slot { kI1 = kMaxTimes, kI2, kI2a, kSlots };
// Slots 0 .. times-1 hold D at each time.
using Sums = std::array<double, kSlots>;

// One sweep over the (x, z) nodes: D at every entry of `times` and, when
// terms_at >= 0, I1, I2 and I2_a at times[terms_at].
Sums sweep(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
           double eps, int n_x, int n_z, int theta_nodes,
           const std::vector<double>& times, int terms_at) {
  const int dim = X.dim();
  if (Y.dim() != dim || kernel.dim() != dim)
    throw InvalidInput("flow and kernel dimensions differ");
  const int nt = static_cast<int>(times.size());
  if (nt < 1 || nt > kMaxTimes || terms_at >= nt)
    throw InvalidInput("functional sweep: bad time list");
  const bool terms = terms_at >= 0;
  const QuadratureGrid xg = QuadratureGrid::torus(dim, n_x);
  const GaussRule theta = gauss_legendre(std::max(1, theta_nodes));
  const bool with_theta = terms && theta_nodes > 0;
  const bool moving_eta =
      kernel.eta().kind() != DirectionField::Kind::constant;
  const PiecewiseField& field = X.field();

  const auto per_x = parallel_map<Sums>(xg.size(), [&](std::size_t i) {
    const Vec x = xg.node(i);
    std::array<FlowSample, kMaxTimes> xs, ys;
    X.sample_many(times, x, xs.data());
    std::array<double, kMaxTimes> mu1;
    bool any = false;
    for (int k = 0; k < nt; ++k) {
      mu1[k] = std::exp(xs[k].log_jacobian);
      any = any || mu1[k] != 0.0;
    }
    Sums out{};
    if (!any) return out;
    const Vec bx = terms ? X.source_velocity(x) : Vec();
    const LocalKernel k = kernel.at(x);
    const QuadratureGrid zg = k.z_grid(n_z);
    std::array<CompensatedSum, kSlots> acc;
    for (std::size_t j = 0; j < zg.size(); ++j) {
      const Vec z = zg.node(j);
      const double rho = k.rho(z);
      if (rho == 0.0) continue;
      const Vec y = wrap_vec(x + eps * z);
      Y.sample_many(times, y, ys.data());
      double w_terms = 0.0;
      for (int q = 0; q < nt; ++q) {
        const double w = torus_distance(xs[q].position, ys[q].position) *
                         mu1[q] * std::exp(ys[q].log_jacobian);
        acc[q].add(w * rho);
        if (q == terms_at) w_terms = w;
      }
      if (!terms || w_terms == 0.0) continue;
      const double w = w_terms;
      const Vec d2 = k.d2_rho(z);
      if (moving_eta) acc[kI1].add(-w * k.d1_rho(z).dot(bx));
      acc[kI2].add(-w * d2.dot(Y.source_velocity(y) - bx) / eps);
      if (with_theta) {
        double s = 0.0;
        for (std::size_t q = 0; q < theta.nodes.size(); ++q) {
          const Vec p = wrap_vec(x + eps * theta.nodes[q] * z);
          s += theta.weights[q] * d2.dot(field.jacobian(p) * z);
        }
        acc[kI2a].add(-w * s);
      }
    }
    for (int s = 0; s < kSlots; ++s) out[s] = acc[s].value() * zg.weight();
    return out;
  });

  Sums total{};
  for (int s = 0; s < kSlots; ++s) {
    CompensatedSum c;
    for (const Sums& v : per_x) c.add(v[s]);
    total[s] = c.value() * xg.weight();
    if (!std::isfinite(total[s]))
      throw QuadratureError("non-finite functional value", 0);
  }
  return total;
}

struct GridPass {
  double discrepancy = 0.0;
  double limit = 0.0;
  double sup_mu = 0.0;
};

GridPass grid_pass(const FlowMap& X, const FlowMap& Y, double t, int n) {
  const QuadratureGrid g = QuadratureGrid::torus(X.dim(), n);
  const PiecewiseField& field = X.field();
  const auto vals = parallel_map<std::array<double, 3>>(
      g.size(), [&](std::size_t i) {
        const Vec x = g.node(i);
        const FlowSample a = X.sample(t, x);
        const FlowSample b = Y.sample(t, x);
        const double m1 = std::exp(a.log_jacobian);
        const double m2 = std::exp(b.log_jacobian);
        const double w = torus_distance(a.position, b.position) * m1 * m2;
        return std::array<double, 3>{w, w == 0.0 ? 0.0 : w * field.divergence(x),
                                     std::max(m1, m2)};
      });
  CompensatedSum d, l;
  GridPass out;
  for (const auto& v : vals) {
    d.add(v[0]);
    l.add(v[1]);
    out.sup_mu = std::max(out.sup_mu, v[2]);
  }
  out.discrepancy = d.value() * g.weight();
  out.limit = l.value() * g.weight();
  return out;
}

double d_at(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
            const FunctionalConfig& c, double t, int n_x, int n_z) {
  return sweep(X, Y, kernel, c.epsilon, n_x, n_z, 0, {t}, -1)[0];
}

double fd_at(const FlowMap& X, const FlowMap& Y,
             const AnisotropicKernel& kernel, const FunctionalConfig& c,
             double dt, int n_x, int n_z) {
  const Sums s = sweep(X, Y, kernel, c.epsilon, n_x, n_z, 0,
                       {c.t - dt, c.t + dt}, -1);
  return (s[1] - s[0]) / (2.0 * dt);
}

}  // namespace

double discrepancy_D(const FlowMap& X, const FlowMap& Y,
                     const AnisotropicKernel& kernel,
                     const FunctionalConfig& config, double t) {
  config.validate(kernel);
  return d_at(X, Y, kernel, config, t, config.n_x, config.n_z);
}

FunctionalTerms functional_terms(const FlowMap& X, const FlowMap& Y,
                                 const AnisotropicKernel& kernel,
                                 const FunctionalConfig& config) {
  config.validate(kernel);
  const Sums s = sweep(X, Y, kernel, config.epsilon, config.n_x, config.n_z,
                       config.theta_nodes, {config.t}, 0);
  return {s[0], s[kI1], s[kI2], s[kI2a]};
}

double I_eps_fd(const FlowMap& X, const FlowMap& Y,
                const AnisotropicKernel& kernel,
                const FunctionalConfig& config) {
  config.validate(kernel);
  return fd_at(X, Y, kernel, config, config.dt_fd, config.n_x, config.n_z);
}

double I1(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
          const FunctionalConfig& config) {
  FunctionalConfig c = config;
  c.theta_nodes = 0;
  return functional_terms(X, Y, kernel, c).I1;
}

double I2(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
          const FunctionalConfig& config) {
  FunctionalConfig c = config;
  c.theta_nodes = 0;
  return functional_terms(X, Y, kernel, c).I2;
}

double I2_a_limit(const FlowMap& X, const FlowMap& Y, double t, int n) {
  return grid_pass(X, Y, t, n).limit;
}

double flow_discrepancy(const FlowMap& X, const FlowMap& Y, double t, int n) {
  return grid_pass(X, Y, t, n).discrepancy;
}

double R_a_check(const PiecewiseField& field, const AnisotropicKernel& kernel,
                 const Vec& x, int n_z) {
  const TorusPoint p = wrap(x);
  const Mat a = field.grad_a(p);
  const LocalKernel k = kernel.at(p.coords());
  const QuadratureGrid zg = k.z_grid(n_z);
  CompensatedSum s;
  for (std::size_t j = 0; j < zg.size(); ++j) {
    const Vec z = zg.node(j);
    s.add(k.d2_rho(z).dot(a * z));
  }
  return s.value() * zg.weight() + a.trace();
}

double singular_bound(const PiecewiseField& field,
                      const AnisotropicKernel& kernel, double C_t,
                      int n_surface, int n_z) {
  const int dim = field.dim();
  CompensatedSum total;
  for (const JumpComponent& jump : field.jumps()) {
    const Vec xi = jump.jump_direction();
    const Vec eta_b = jump.normal();
    const auto nodes = surface_nodes(jump, dim, n_surface);
    const auto vals = parallel_map<double>(nodes.size(), [&](std::size_t i) {
      const LocalKernel k = kernel.at(nodes[i].point);
      const QuadratureGrid zg = k.z_grid(n_z);
      CompensatedSum s;
      for (std::size_t j = 0; j < zg.size(); ++j) {
        const Vec z = zg.node(j);
        s.add(std::abs(k.d2_rho(z).dot(xi) * eta_b.dot(z)));
      }
      return s.value() * zg.weight();
    });
    for (std::size_t i = 0; i < nodes.size(); ++i)
      total.add(vals[i] * nodes[i].weight * jump.density());
  }
  return 2.0 * C_t * C_t * total.value();
}

double misalignment_mass(const PiecewiseField& field, const DirectionField& eta,
                         int n_surface) {
  CompensatedSum total;
  for (const JumpComponent& jump : field.jumps()) {
    const Vec eta_b = jump.normal();
    total.add(surface_quadrature(
        jump, field.dim(),
        [&](const Vec& x) { return (eta.eval(x) - eta_b).norm(); },
        n_surface));
  }
  return total.value();
}

double singular_bound_majorant(const PiecewiseField& field,
                               const AnisotropicKernel& kernel, double C_t,
                               int n_surface) {
  const double g = kernel.gamma();
  const double k0 = derivative_moment(kernel.profile());
  return 2.0 * C_t * C_t * k0 *
         (field.singular_mass() / (1.0 + g) +
          2.0 * (1.0 + 2.0 * g) *
              misalignment_mass(field, kernel.eta(), n_surface));
}

ScalarBoundStats check_scalar_bounds(const PiecewiseField& field, int samples,
                                     unsigned long long seed) {
  if (!field.has_jumps())
    throw InvalidInput("scalar bounds need a field with jumps");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const int dim = field.dim();
  std::vector<std::vector<SurfaceNode>> nodes;
  for (const auto& jump : field.jumps())
    nodes.push_back(surface_nodes(jump, dim, 16));
  const BumpProfile profile(ProfileKind::smooth_exp, dim);

  ScalarBoundStats st;
  st.worst_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const std::size_t j =
        std::min(field.jumps().size() - 1,
                 static_cast<std::size_t>(u(rng) * field.jumps().size()));
    const JumpComponent& jump = field.jumps()[j];
    const auto& list = nodes[j];
    const Vec x = list[std::min(list.size() - 1,
                                static_cast<std::size_t>(u(rng) * list.size()))]
                      .point;
    const double gamma = u(rng) < 0.1 ? 0.0 : std::pow(10.0, 3.0 * u(rng));
    const double delta = 0.5 * u(rng);
    Vec dir(dim);
    for (int d = 0; d < dim; ++d) dir[d] = g(rng);
    const Vec z = dir / dir.norm() * std::pow(u(rng), 1.0 / dim);

    const Vec eta_b = jump.normal();
    const Vec xi_b = jump.jump_direction();
    const AnisotropicKernel k(profile,
                              DirectionField::constant(rotate12(eta_b, delta)),
                              gamma);
    const double mis = (k.eta().eval(x) - eta_b).norm();
    const double lhs1 = std::abs(z.dot(k.U(x) * xi_b));
    const double rhs1 = (1.0 + gamma * mis) * z.norm();
    const double lhs2 = std::abs(eta_b.dot(k.U_inv(x) * z));
    const double rhs2 = (mis + 1.0 / (1.0 + gamma)) * z.norm();
    for (auto [l, r] : {std::pair{lhs1, rhs1}, std::pair{lhs2, rhs2}}) {
      if (l > r * (1.0 + 1e-12) + 1e-15) ++st.violations;
      st.worst_margin = std::min(st.worst_margin, r - l);
    }
    ++st.samples;
  }
  return st;
}

double tradeoff_envelope(double gamma, double delta, double singular_mass) {
  return 1.0 / (1.0 + gamma) + (1.0 + 2.0 * gamma) * delta * singular_mass;
}

TradeoffTable gamma_eta_tradeoff(const PiecewiseField& field,
                                 const std::vector<double>& gammas,
                                 const std::vector<double>& deltas,
                                 int diagonal_length) {
  if (gammas.empty() || deltas.empty())
    throw InvalidInput("tradeoff grid needs gamma and delta values");
  const double mass = field.singular_mass();
  TradeoffTable out;
  out.best.envelope = std::numeric_limits<double>::infinity();
  for (double g : gammas)
    for (double d : deltas) {
      const TradeoffRow row{g, d, tradeoff_envelope(g, d, mass)};
      out.grid.push_back(row);
      if (row.envelope < out.best.envelope) out.best = row;
    }
  for (int k = 1; k <= diagonal_length; ++k)
    out.diagonal.push_back(
        tradeoff_envelope(k, 1.0 / (static_cast<double>(k) * k), mass));
  return out;
}

double trace_integral(const Mat& M, const LocalKernel& kernel, int n_z,
                      double* signed_integral) {
  const QuadratureGrid zg = kernel.z_grid(n_z);
  CompensatedSum a, s;
  for (std::size_t j = 0; j < zg.size(); ++j) {
    const Vec z = zg.node(j);
    const double v = (M * z).dot(kernel.d2_rho(z));
    a.add(std::abs(v));
    s.add(v);
  }
  if (signed_integral) *signed_integral = s.value() * zg.weight();
  return a.value() * zg.weight();
}

namespace {

std::vector<Vec> directions(int dim, int count) {
  std::vector<Vec> out;
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = kPi * i / count;
      Vec v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  // Fibonacci points on the upper half sphere.
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double zc = 1.0 - (i + 0.5) / count;
    const double r = std::sqrt(1.0 - zc * zc);
    Vec v(3);
    v << r * std::cos(golden * i), r * std::sin(golden * i), zc;
    out.push_back(v);
  }
  return out;
}

}  // namespace

TraceResult trace_identity(const Mat& M, const BumpProfile& profile,
                           const std::vector<double>& gammas, int angles,
                           int n_z) {
  const int dim = profile.dim();
  if (M.rows() != dim || M.cols() != dim || !M.allFinite())
    throw InvalidInput("trace identity needs a finite N x N matrix");
  if (gammas.empty() || angles < 1)
    throw InvalidInput("trace identity needs a nonempty kernel family");
  const auto dirs = directions(dim, angles);
  struct Case {
    double gamma;
    std::size_t dir;
  };
  std::vector<Case> cases;
  for (double g : gammas)
    for (std::size_t d = 0; d < dirs.size(); ++d) cases.push_back({g, d});

  const double tr = M.trace();
  const auto vals =
      parallel_map<std::array<double, 2>>(cases.size(), [&](std::size_t i) {
        const LocalKernel k(profile, cases[i].gamma, dirs[cases[i].dir],
                            Mat::Zero(dim, dim));
        double sgn = 0.0;
        const double v = trace_integral(M, k, n_z, &sgn);
        return std::array<double, 2>{v, sgn};
      });
  TraceResult out;
  out.trace = tr;
  out.infimum = std::numeric_limits<double>::infinity();
  out.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const double v = vals[i][0];
    out.min_margin = std::min(out.min_margin, v - std::abs(tr));
    out.max_identity_error =
        std::max(out.max_identity_error, std::abs(vals[i][1] + tr));
    if (v < out.infimum) {
      out.infimum = v;
      out.best_gamma = cases[i].gamma;
      out.best_eta = dirs[cases[i].dir];
    }
  }
  return out;
}

std::vector<std::string> report_csv_header() {
  return {"field",          "epsilon",    "gamma", "t",
          "n_x",            "n_z",        "D",     "I_eps_fd",
          "I1",             "I2",         "I2_a_limit",
          "singular_bound", "eqfin_residual", "error_bound"};
}

std::vector<std::string> report_csv_row(const DiscrepancyReport& r) {
  return {r.field_id,
          format_real(r.epsilon),
          format_real(r.gamma),
          format_real(r.t),
          std::to_string(r.n_x),
          std::to_string(r.n_z),
          format_real(r.D),
          format_real(r.I_eps_fd),
          format_real(r.I1),
          format_real(r.I2),
          format_real(r.I2_a_limit),
          format_real(r.singular_bound),
          format_real(r.eqfin_residual),
          format_real(r.error_bound)};
}

DiscrepancyReport discrepancy_report(const FlowMap& X, const FlowMap& Y,
                                     const AnisotropicKernel& kernel,
                                     const FunctionalConfig& config,
                                     const ReportOptions& options) {
  config.validate(kernel);
  const FunctionalConfig& c = config;
  DiscrepancyReport r;
  r.field_id = X.field().id();
  r.epsilon = c.epsilon;
  r.gamma = kernel.gamma();
  r.t = c.t;
  r.n_x = c.n_x;
  r.n_z = c.n_z;

  // D at t - 2dt, t - dt, t, t + dt, t + 2dt (outer pair only for the error
  // estimate) with the terms at t.
  const double dt = c.dt_fd;
  const bool wide = options.error_estimate;
  const std::vector<double> times =
      wide ? std::vector<double>{c.t - 2 * dt, c.t - dt, c.t, c.t + dt,
                                 c.t + 2 * dt}
           : std::vector<double>{c.t - dt, c.t, c.t + dt};
  const int mid = wide ? 2 : 1;
  const Sums full =
      sweep(X, Y, kernel, c.epsilon, c.n_x, c.n_z, 0, times, mid);
  r.D = full[mid];
  r.I1 = full[kI1];
  r.I2 = full[kI2];
  r.I_eps_fd = (full[mid + 1] - full[mid - 1]) / (2.0 * dt);

  const GridPass g = grid_pass(X, Y, c.t, c.n_x);
  r.I2_a_limit = g.limit;
  r.eqfin_residual = std::abs(r.I_eps_fd - r.I2_a_limit);
  const double C_t = options.C_t > 0.0 ? options.C_t : g.sup_mu;
  r.singular_bound =
      X.field().has_jumps() ? singular_bound(X.field(), kernel, C_t) : 0.0;

  if (options.error_estimate) {
    const int hx = std::max(2, c.n_x / 2), hz = std::max(2, c.n_z / 2);
    const Sums half = sweep(X, Y, kernel, c.epsilon, hx, hz, 0,
                            {c.t - dt, c.t, c.t + dt}, 1);
    const double fd_half = (half[2] - half[0]) / (2.0 * dt);
    const double fd_wide = (full[4] - full[0]) / (4.0 * dt);
    r.error_bound = std::abs(r.I_eps_fd - fd_half) +
                    std::abs(r.I1 - half[kI1]) + std::abs(r.I2 - half[kI2]) +
                    std::abs(r.I_eps_fd - fd_wide);
  }
  return r;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::unique: return "UNIQUE";
    case Verdict::not_unique: return "NOT_UNIQUE";
    case Verdict::hypotheses_violated: return "HYPOTHESES_VIOLATED";
  }
  return "?";
}

UniquenessReport uniqueness_report(const FlowMap& X, const FlowMap& Y,
                                   const AnisotropicKernel& kernel,
                                   const UniquenessConfig& config) {
  const PiecewiseField& field = X.field();
  UniquenessReport out;
  for (const JumpComponent& jump : field.jumps()) {
    const double s = jump.jump_direction().dot(jump.normal());
    if (std::abs(s) > 1e-12) {
      out.verdict = Verdict::hypotheses_violated;
      out.reason = "field " + field.id() +
                   ": singular divergence on the jump set (<xi_b, eta_b> = " +
                   format_real(s) + ")";
      return out;
    }
  }
  if (!(config.T > 0.0) || config.time_steps < 1)
    throw InvalidInput("uniqueness report needs T > 0 and time_steps >= 1");

  for (int k = 0; k <= config.time_steps; ++k) {
    const double t = config.T * k / config.time_steps;
    out.times.push_back(t);
    out.discrepancy.push_back(flow_discrepancy(X, Y, t, config.n_x));
  }
  for (const RefinementLevel& level : config.levels) {
    double worst = 0.0;
    for (double t : config.residual_times) {
      FunctionalConfig fc;
      fc.epsilon = level.epsilon;
      fc.n_x = level.n_x;
      fc.n_z = level.n_z;
      fc.t = t;
      fc.dt_fd = config.dt_fd;
      fc.theta_nodes = 0;
      const DiscrepancyReport r = discrepancy_report(
          X, config.residual_on_first ? X : Y, kernel, fc, {0.0, false});
      worst = std::max(worst, r.eqfin_residual);
      out.rows.push_back(r);
    }
    out.eqfin_residual.push_back(worst);
  }
  const double residual =
      out.eqfin_residual.empty() ? 0.0 : out.eqfin_residual.back();
  out.gronwall_bound = std::exp(field.div_sup() * config.T) *
                       (out.discrepancy.front() + config.T * residual);
  out.final_discrepancy = out.discrepancy.back();
  const bool starts_equal = out.discrepancy.front() <= config.tolerance;
  if (starts_equal && out.final_discrepancy <= config.tolerance) {
    out.verdict = Verdict::unique;
    out.reason = "final discrepancy " + format_real(out.final_discrepancy) +
                 " <= " + format_real(config.tolerance);
  } else {
    out.verdict = Verdict::not_unique;
    out.reason = starts_equal ? "final discrepancy " +
                                    format_real(out.final_discrepancy) +
                                    " exceeds the tolerance"
                              : "flows differ initially";
  }
  return out;
}

double branch_discrepancy(const PiecewiseField& field, double t, int m) {
  FlowSolverConfig fwd;
  fwd.method = field.piecewise_constant() ? SolverMethod::explicit_exact
                                          : SolverMethod::rk4_event;
  fwd.sink = SinkPolicy::capture;
  const FlowEnsemble ens = integrate_flow(field, fwd, m, {0.0, t});
  const int it = ens.require_time(t);
  FlowSolverConfig plus = fwd, minus = fwd;
  plus.sink = minus.sink = SinkPolicy::error;
  plus.start_side = +1;
  minus.start_side = -1;
  return deterministic_sum(ens.size(), [&](std::size_t i) {
           const Vec z = ens.position(it, i);
           const Vec a = wrap_vec(integrate_point(field, plus, z, -t).lifted);
           const Vec b = wrap_vec(integrate_point(field, minus, z, -t).lifted);
           return torus_distance(a, b);
         }) /
         static_cast<double>(ens.size());
}

}  // namespace rfl
