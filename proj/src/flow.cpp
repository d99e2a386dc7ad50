#include "rfl/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "rfl/csv.hpp"
#include "rfl/errors.hpp"
#include "rfl/parallel.hpp"

namespace rfl {

std::string to_string(SolverMethod m) {
  return m == SolverMethod::rk4_event ? "rk4_event" : "explicit_exact";
}

SolverMethod parse_method(const std::string& s) {
  if (s == "rk4_event") return SolverMethod::rk4_event;
  if (s == "explicit_exact") return SolverMethod::explicit_exact;
  throw InvalidInput("unknown solver method '" + s + "'");
}

void FlowSolverConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h))
    throw InvalidInput("solver step h must be positive");
  if (!(event_tol > 0.0) || event_tol > h)
    throw InvalidInput("event_tol must satisfy 0 < event_tol <= h");
  if (max_crossings < 0) throw InvalidInput("max_crossings must be >= 0");
  if (start_side != 1 && start_side != -1)
    throw InvalidInput("start_side must be +1 or -1");
}

namespace {

std::string describe(const Vec& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

constexpr double kSpeedTol = 1e-12;

struct Integrator {
  const PiecewiseField& field;
  const FlowSolverConfig& config;
  const TrajectoryObserver& observer;
  double dir;  // +1 forward, -1 backward
  TrajectoryState st;
  int piece = 0;
  double elapsed = 0.0;

  // Initial state at x, nudged off a jump surface when needed.
  void start(const Vec& x) {
    st.lifted = x;
    const int j = field.jump_at(wrap_vec(x));
    if (j >= 0) {
      st.lifted += config.start_side * kStartNudge * field.jumps()[j].normal();
      st.nudged = true;
    }
    piece = field.locate(wrap_vec(st.lifted));
  }

  void advance(double total) {
    if (total == 0.0) return;
    if (config.method == SolverMethod::explicit_exact) {
      if (field.piecewise_constant())
        run_piecewise_constant(total);
      else if (field.id() == "B")
        run_field_b(total);
      else
        throw InvalidInput("explicit_exact has no closed form for field " +
                           field.id());
    } else {
      run_rk4(total);
    }
  }

  void emit(int p) const {
    if (observer) observer(dir * elapsed, st.lifted, p);
  }

  Vec velocity(int p, const Vec& x) const {
    return dir * field.pieces()[p].value(x);
  }

  // One RK4 step of (x, log J) with a fixed piece formula.
  void rk4(int p, const Vec& x, double l, double dt, Vec& x1, double& l1) const {
    const auto& pc = field.pieces()[p];
    auto rhs = [&](const Vec& y, Vec& v, double& dl) {
      v = dir * pc.value(y);
      dl = dir * pc.jacobian(y).trace();
    };
    Vec k1, k2, k3, k4;
    double q1, q2, q3, q4;
    rhs(x, k1, q1);
    rhs(x + 0.5 * dt * k1, k2, q2);
    rhs(x + 0.5 * dt * k2, k3, q3);
    rhs(x + dt * k3, k4, q4);
    x1 = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    l1 = l + dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
  }

  int nearest_jump(const Vec& x) const {
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    const auto& jumps = field.jumps();
    for (std::size_t j = 0; j < jumps.size(); ++j) {
      const double d = std::abs(jumps[j].level(x)) /
                       jumps[j].wavevector.cast<double>().norm();
      if (d < dist) {
        dist = d;
        best = static_cast<int>(j);
      }
    }
    return best;
  }

  // Resolves arrival on a jump surface moving from piece `from` to `to`.
  void cross(int from, int to) {
    const int j = nearest_jump(st.lifted);
    const JumpComponent& jump = field.jumps()[j];
    const Vec n = jump.normal();
    const Vec v_from = velocity(from, st.lifted);
    const Vec v_to = velocity(to, st.lifted);
    const double orient = v_from.dot(n) >= 0.0 ? 1.0 : -1.0;
    const double a = orient * v_from.dot(n);
    const double c = orient * v_to.dot(n);
    const std::string where = "field " + field.id() + " at x=" +
                              describe(wrap_vec(st.lifted)) + ", t=" +
                              format_real(dir * elapsed);
    if (a <= kSpeedTol)
      throw NonTransversalCrossing("non-transversal crossing (tangential "
                                   "arrival) for " + where);
    if (c > kSpeedTol) {
      st.log_jacobian += std::log(c / a);
      emit(from);
      piece = to;
      emit(to);
      if (++st.crossings > config.max_crossings)
        throw RunawayError("more than " + std::to_string(config.max_crossings) +
                           " crossings for " + where);
      return;
    }
    if (c < -kSpeedTol && config.sink == SinkPolicy::capture) {
      const double alpha = c / (c - a);
      const Vec slide = alpha * v_from + (1.0 - alpha) * v_to;
      if (slide.norm() <= kSpeedTol) {
        const Vec k = jump.wavevector.cast<double>();
        st.lifted -= jump.level(st.lifted) / k.squaredNorm() * k;
        st.captured = true;
        st.log_jacobian = -std::numeric_limits<double>::infinity();
        emit(from);
        emit(-1);
        return;
      }
      throw NonTransversalCrossing("non-transversal crossing (sliding) for " +
                                   where);
    }
    throw NonTransversalCrossing(
        "non-transversal crossing (opposing or tangential traces) for " +
        where);
  }

  bool done(double total) const {
    return total - elapsed <= 1e-15 * std::max(1.0, total);
  }

  void run_rk4(double total) {
    const double h = config.h;
    while (!done(total) && !st.captured) {
      const double dt = std::min(h, total - elapsed);
      Vec x1;
      double l1;
      rk4(piece, st.lifted, st.log_jacobian, dt, x1, l1);
      const int p1 = field.locate(wrap_vec(x1));
      if (p1 == piece) {
        st.lifted = x1;
        st.log_jacobian = l1;
        elapsed += dt;
        emit(piece);
        continue;
      }
      // Bisect on the step fraction to the interface.
      double lo = 0.0, hi = dt;
      Vec xm;
      double lm;
      while (hi - lo > config.event_tol) {
        const double mid = 0.5 * (lo + hi);
        rk4(piece, st.lifted, st.log_jacobian, mid, xm, lm);
        if (field.locate(wrap_vec(xm)) == piece)
          lo = mid;
        else
          hi = mid;
      }
      rk4(piece, st.lifted, st.log_jacobian, hi, xm, lm);
      const int to = field.locate(wrap_vec(xm));
      st.lifted = xm;
      st.log_jacobian = lm;
      elapsed += hi;
      cross(piece, to);
    }
  }

  void run_piecewise_constant(double total) {
    const auto& jumps = field.jumps();
    while (!done(total) && !st.captured) {
      const Vec v = velocity(piece, st.lifted);
      double tau = std::numeric_limits<double>::infinity();
      for (const auto& jump : jumps) {
        const Vec k = jump.wavevector.cast<double>();
        const double r = v.dot(k);
        if (r == 0.0) continue;
        const double phase = st.lifted.dot(k) - jump.offset;
        double d = r > 0.0 ? wrap_coordinate(-phase) : wrap_coordinate(phase);
        if (d <= 1e-12) d += 1.0;  // just crossed this surface
        tau = std::min(tau, d / std::abs(r));
      }
      if (elapsed + tau >= total) {
        st.lifted += (total - elapsed) * v;
        elapsed = total;
        emit(piece);
        break;
      }
      st.lifted += tau * v;
      elapsed += tau;
      const int j = nearest_jump(st.lifted);
      const JumpComponent& jump = jumps[j];
      const Vec k = jump.wavevector.cast<double>();
      st.lifted -= jump.level(st.lifted) / k.squaredNorm() * k;
      const double orient = v.dot(jump.normal()) >= 0.0 ? 1.0 : -1.0;
      const int to =
          field.locate(wrap_vec(st.lifted + orient * 1e-9 * jump.normal()));
      cross(piece, to);
    }
  }

  // x1' = sin(2 pi x1): tan(pi x1) grows like exp(2 pi t).
  void run_field_b(double total) {
    const Vec x0 = st.lifted;
    const double base = std::floor(x0[0]);
    const double f = x0[0] - base;
    const double s = std::sin(kPi * f), c = std::cos(kPi * f);
    const double l0 = st.log_jacobian;
    auto at = [&](double tau) {
      const double t = dir * tau;
      const double e = std::exp(kPi * t);
      st.lifted = x0;
      st.lifted[0] = base + std::atan2(s * e, c / e) / kPi;
      st.log_jacobian = l0 - std::log(s * s * e * e + c * c / (e * e));
    };
    if (!observer) {
      at(total);
      elapsed = total;
      return;
    }
    const long steps = static_cast<long>(std::ceil(total / config.h - 1e-9));
    for (long i = 1; i <= steps; ++i) {
      elapsed = std::min(total, static_cast<double>(i) * config.h);
      at(elapsed);
      emit(0);
    }
    elapsed = total;
  }
};

}  // namespace

TrajectoryState integrate_point(const PiecewiseField& field,
                                const FlowSolverConfig& config, const Vec& x,
                                double t, const TrajectoryObserver& observer) {
  config.validate();
  if (x.size() != field.dim())
    throw InvalidInput("starting point has dimension " +
                       std::to_string(x.size()) + ", field has " +
                       std::to_string(field.dim()));
  if (!x.allFinite() || !std::isfinite(t))
    throw InvalidInput("non-finite starting point or time");

  Integrator in{field, config, observer, t < 0.0 ? -1.0 : 1.0, {}, 0, 0.0};
  in.start(x);
  in.emit(in.piece);
  in.advance(std::abs(t));
  return in.st;
}

int FlowEnsemble::time_index(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-12) return static_cast<int>(i);
  return -1;
}

int FlowEnsemble::require_time(double t) const {
  const int i = time_index(t);
  if (i < 0)
    throw InvalidInput("time " + format_real(t) +
                       " is not among the ensemble times");
  return i;
}

FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config,
                            std::vector<Vec> initial_points,
                            std::vector<double> times) {
  config.validate();
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.empty() || std::none_of(times.begin(), times.end(),
                                    [](double t) { return t == 0.0; }))
    throw InvalidInput("ensemble times must include 0");
  for (const Vec& x : initial_points)
    if (x.size() != field.dim() || !x.allFinite())
      throw InvalidInput("invalid initial point " + describe(x));

  FlowEnsemble ens;
  ens.field_id = field.id();
  ens.dim = field.dim();
  ens.config = config;
  ens.initial_points = std::move(initial_points);
  ens.times = std::move(times);

  struct Track {
    std::vector<Vec> disp;
    std::vector<double> logj;
    std::vector<unsigned char> captured;
    bool nudged = false;
  };
  const std::size_t nt = ens.times.size();
  auto tracks = parallel_map<Track>(ens.size(), [&](std::size_t i) {
    Track tr;
    tr.disp.reserve(nt);
    const Vec& x0 = ens.initial_points[i];
    for (double t : ens.times) {
      if (t == 0.0) {
        tr.disp.push_back(Vec::Zero(x0.size()));
        tr.logj.push_back(0.0);
        tr.captured.push_back(0);
        continue;
      }
      const TrajectoryState st = integrate_point(field, config, x0, t);
      tr.disp.push_back(st.lifted - x0);
      tr.logj.push_back(st.log_jacobian);
      tr.captured.push_back(st.captured ? 1 : 0);
      tr.nudged = tr.nudged || st.nudged;
    }
    return tr;
  });

  ens.displacement.assign(nt, std::vector<Vec>(ens.size()));
  ens.log_jacobian.assign(nt, std::vector<double>(ens.size()));
  ens.captured.assign(nt, std::vector<unsigned char>(ens.size()));
  for (std::size_t i = 0; i < ens.size(); ++i) {
    for (std::size_t k = 0; k < nt; ++k) {
      ens.displacement[k][i] = tracks[i].disp[k];
      ens.log_jacobian[k][i] = tracks[i].logj[k];
      ens.captured[k][i] = tracks[i].captured[k];
    }
    if (tracks[i].nudged) ++ens.nudged_starts;
  }
  return ens;
}

FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config,
                            const IVec& grid_counts,
                            std::vector<double> times) {
  if (grid_counts.size() != field.dim() || (grid_counts.array() < 1).any())
    throw InvalidInput("grid counts must be positive, one per dimension");
  const QuadratureGrid grid = QuadratureGrid::torus(grid_counts);
  std::vector<Vec> points(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) points[i] = grid.node(i);
  FlowEnsemble ens =
      integrate_flow(field, config, std::move(points), std::move(times));
  ens.grid_counts = grid_counts;
  return ens;
}

FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config, int m,
                            std::vector<double> times) {
  if (m < 1) throw InvalidInput("grid size m must be positive");
  return integrate_flow(field, config, IVec::Constant(field.dim(), m),
                        std::move(times));
}

double DensityField::mean() const {
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value() / static_cast<double>(values.size());
}

double DensityField::min() const {
  return *std::min_element(values.begin(), values.end());
}

double DensityField::max() const {
  return *std::max_element(values.begin(), values.end());
}

DensityField DensityField::coarsen(int bins) const {
  const int dim = static_cast<int>(counts.size());
  for (int d = 0; d < dim; ++d)
    if (bins < 1 || counts[d] % bins != 0)
      throw InvalidInput("coarsen: bins must divide the grid counts");
  DensityField out;
  out.t = t;
  out.counts = IVec::Constant(dim, bins);
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(bins);
  out.values.assign(total, 0.0);
  std::vector<std::size_t> hits(total, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t rem = i, b = 0, stride = 1;
    for (int d = dim - 1; d >= 0; --d) {
      const std::size_t id = rem % counts[d];
      rem /= counts[d];
      b += (id / (counts[d] / bins)) * stride;
      stride *= static_cast<std::size_t>(bins);
    }
    out.values[b] += values[i];
    ++hits[b];
  }
  for (std::size_t b = 0; b < total; ++b)
    out.values[b] /= static_cast<double>(hits[b]);
  return out;
}

namespace {

void require_grid(const FlowEnsemble& ens) {
  if (ens.grid_counts.size() != ens.dim)
    throw InvalidInput("density needs an ensemble on a uniform grid");
}

DensityField exp_log_jacobian(const FlowEnsemble& ens, int idx, double t) {
  DensityField out;
  out.t = t;
  out.counts = ens.grid_counts;
  out.values.resize(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i)
    out.values[i] = std::exp(ens.log_jacobian[idx][i]);
  return out;
}

}  // namespace

DensityField density_from_flow(const FlowEnsemble& ens, double t) {
  require_grid(ens);
  const int idx = ens.time_index(-t);
  if (idx < 0)
    throw InvalidInput("density at t=" + format_real(t) +
                       " needs backward data at t=" + format_real(-t));
  return exp_log_jacobian(ens, idx, t);
}

DensityField transport_weight(const FlowEnsemble& ens, double t) {
  require_grid(ens);
  return exp_log_jacobian(ens, ens.require_time(t), t);
}

DensityField pushforward_histogram(const FlowEnsemble& ens, double t,
                                   int bins) {
  if (bins < 1) throw InvalidInput("bins must be positive");
  const int idx = ens.require_time(t);
  DensityField out;
  out.t = t;
  out.counts = IVec::Constant(ens.dim, bins);
  std::size_t total = 1;
  for (int d = 0; d < ens.dim; ++d) total *= static_cast<std::size_t>(bins);
  std::vector<std::size_t> count(total, 0);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vec x = ens.position(idx, i);
    std::size_t b = 0;
    for (int d = 0; d < ens.dim; ++d) {
      const int k = std::min(bins - 1, static_cast<int>(x[d] * bins));
      b = b * bins + static_cast<std::size_t>(k);
    }
    ++count[b];
  }
  const double scale =
      static_cast<double>(total) / static_cast<double>(ens.size());
  out.values.resize(total);
  for (std::size_t b = 0; b < total; ++b)
    out.values[b] = static_cast<double>(count[b]) * scale;
  return out;
}

double check_group_property(const PiecewiseField& field,
                            const FlowEnsemble& ens, double s, double t) {
  const int is = ens.require_time(s);
  const int ist = ens.require_time(s + t);
  const auto defects = parallel_map<double>(ens.size(), [&](std::size_t i) {
    const Vec xs = ens.initial_points[i] + ens.displacement[is][i];
    const TrajectoryState st = integrate_point(field, ens.config, xs, t);
    const Vec& x0 = ens.initial_points[i];
    return min_image_vec((st.lifted - x0) - ens.displacement[ist][i]).norm();
  });
  double worst = 0.0;
  for (double d : defects) worst = std::max(worst, d);
  return worst;
}

double check_ode_residual(const PiecewiseField& field,
                          const FlowSolverConfig& config, const Vec& x,
                          double t) {
  struct Node {
    double s;
    Vec b;
  };
  std::vector<Node> nodes;
  const TrajectoryState st = integrate_point(
      field, config, x, t, [&](double s, const Vec& y, int p) {
        nodes.push_back({s, p >= 0 ? Vec(field.pieces()[p].value(y))
                                   : Vec(Vec::Zero(y.size()))});
      });
  Vec integral = Vec::Zero(x.size());
  for (std::size_t k = 1; k < nodes.size(); ++k)
    integral += 0.5 * (nodes[k].s - nodes[k - 1].s) *
                (nodes[k].b + nodes[k - 1].b);
  Vec start = x;
  if (st.nudged) {
    const int j = field.jump_at(wrap_vec(x));
    start += config.start_side * kStartNudge * field.jumps()[j].normal();
  }
  return min_image_vec(st.lifted - start - integral).norm();
}

void write_ensemble_csv(const FlowEnsemble& ens, std::ostream& out) {
  std::vector<std::string> header{"t"};
  for (int d = 1; d <= ens.dim; ++d) header.push_back("x0_" + std::to_string(d));
  for (int d = 1; d <= ens.dim; ++d) header.push_back("x_" + std::to_string(d));
  header.push_back("logJ");
  write_csv_row(out, header);
  std::vector<std::string> row;
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    for (std::size_t i = 0; i < ens.size(); ++i) {
      row.clear();
      row.push_back(format_real(ens.times[k]));
      for (int d = 0; d < ens.dim; ++d)
        row.push_back(format_real(ens.initial_points[i][d]));
      const Vec x = ens.position(static_cast<int>(k), i);
      for (int d = 0; d < ens.dim; ++d) row.push_back(format_real(x[d]));
      row.push_back(format_real(ens.log_jacobian[k][i]));
      write_csv_row(out, row);
    }
  }
}

SolverFlowMap::SolverFlowMap(const PiecewiseField& field,
                             FlowSolverConfig config)
    : field_(&field), config_(config) {
  config_.validate();
}

FlowSample SolverFlowMap::sample(double t, const Vec& y) const {
  const TrajectoryState st = integrate_point(*field_, config_, y, t);
  return {wrap_vec(st.lifted), st.log_jacobian};
}

void SolverFlowMap::sample_many(const std::vector<double>& times,
                                const Vec& y, FlowSample* out) const {
  if (y.size() != field_->dim() || !y.allFinite())
    throw InvalidInput("bad sample point");
  const TrajectoryObserver none;
  Integrator first{*field_, config_, none, 1.0, {}, 0, 0.0};
  first.start(y);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) throw InvalidInput("non-finite time");
    Integrator in = first;
    in.dir = times[k] < 0.0 ? -1.0 : 1.0;
    in.advance(std::abs(times[k]));
    out[k] = {wrap_vec(in.st.lifted), in.st.log_jacobian};
  }
}

GridFlowMap::GridFlowMap(const PiecewiseField& field,
                         const FlowEnsemble& ensemble)
    : field_(&field), ensemble_(&ensemble) {
  if (field.has_jumps())
    throw InvalidInput("grid interpolation needs a field without jumps");
  if (ensemble.field_id != field.id() || ensemble.dim != field.dim() ||
      ensemble.grid_counts.size() != field.dim())
    throw InvalidInput("ensemble does not match the field or has no grid");
  for (int d = 0; d < field.dim(); ++d)
    if (ensemble.grid_counts[d] < kGridStencil)
      throw InvalidInput("grid interpolation needs at least " +
                         std::to_string(kGridStencil) + " nodes per axis");
  table_.resize(ensemble.times.size());
  for (std::size_t ti = 0; ti < ensemble.times.size(); ++ti) {
    std::vector<double>& tab = table_[ti];
    tab.assign(ensemble.size() * kPacked, 0.0);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      for (int d = 0; d < field.dim(); ++d)
        tab[i * kPacked + d] = ensemble.displacement[ti][i][d];
      tab[i * kPacked + 3] = ensemble.log_jacobian[ti][i];
    }
  }
}

FlowSample GridFlowMap::sample(double t, const Vec& y) const {
  FlowSample out;
  sample_many({t}, y, &out);
  return out;
}

namespace {
// 1 / prod_{b != a} (a - b) for nodes -2 .. 3.
constexpr double kLagrangeInvDenominator[kGridStencil] = {
    -1.0 / 120.0, 1.0 / 24.0, -1.0 / 12.0, 1.0 / 12.0, -1.0 / 24.0,
    1.0 / 120.0};
}  // namespace

void GridFlowMap::sample_many(const std::vector<double>& times, const Vec& y,
                              FlowSample* out) const {
  constexpr int P = kGridStencil;
  const FlowEnsemble& ens = *ensemble_;
  const int dim = ens.dim;
  int base[kMaxDim];
  double w[kMaxDim][P];
  for (int d = 0; d < dim; ++d) {
    const int m = ens.grid_counts[d];
    const double u = wrap_coordinate(y[d]) * m - 0.5;
    const double fl = std::floor(u);
    const double f = u - fl;
    base[d] = static_cast<int>(fl) - (P / 2 - 1);
    // Lagrange weights on nodes -2 .. 3 relative to floor(u).
    const double g[P] = {f + 2.0, f + 1.0, f, f - 1.0, f - 2.0, f - 3.0};
    double left[P], right[P];
    left[0] = 1.0;
    right[P - 1] = 1.0;
    for (int a = 1; a < P; ++a) left[a] = left[a - 1] * g[a - 1];
    for (int a = P - 2; a >= 0; --a) right[a] = right[a + 1] * g[a + 1];
    for (int a = 0; a < P; ++a)
      w[d][a] = left[a] * right[a] * kLagrangeInvDenominator[a];
  }
  std::size_t axis_index[kMaxDim][P];
  for (int d = 0; d < dim; ++d) {
    const int m = ens.grid_counts[d];
    for (int o = 0; o < P; ++o)
      axis_index[d][o] = static_cast<std::size_t>(((base[d] + o) % m + m) % m);
  }
  // Expand the tensor stencil one axis at a time, last axis fastest.
  int terms = 1;
  std::size_t flat[P * P * P];
  double weight[P * P * P];
  flat[0] = 0;
  weight[0] = 1.0;
  for (int d = 0; d < dim; ++d) {
    const std::size_t m = static_cast<std::size_t>(ens.grid_counts[d]);
    for (int c = terms - 1; c >= 0; --c)
      for (int o = P - 1; o >= 0; --o) {
        flat[c * P + o] = flat[c] * m + axis_index[d][o];
        weight[c * P + o] = weight[c] * w[d][o];
      }
    terms *= P;
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    const int ti = ens.require_time(times[k]);
    const double* tab = table_[ti].data();
    double acc[kPacked] = {0.0, 0.0, 0.0, 0.0};
    for (int c = 0; c < terms; ++c) {
      const double* v = tab + flat[c] * kPacked;
      for (int e = 0; e < kPacked; ++e) acc[e] += weight[c] * v[e];
    }
    Vec p = y;
    for (int d = 0; d < dim; ++d) p[d] += acc[d];
    const double l = acc[3];
    out[k] = {wrap_vec(p), l};
  }
}

ShiftedFlowMap::ShiftedFlowMap(std::shared_ptr<const FlowMap> base, Vec pre,
                               Vec post)
    : base_(std::move(base)), pre_(std::move(pre)), post_(std::move(post)) {
  if (pre_.size() != base_->dim() || post_.size() != base_->dim())
    throw InvalidInput("shift dimension does not match the flow");
}

FlowSample ShiftedFlowMap::sample(double t, const Vec& y) const {
  FlowSample s = base_->sample(t, wrap_vec(y + pre_));
  s.position = wrap_vec(s.position + post_);
  return s;
}

void ShiftedFlowMap::sample_many(const std::vector<double>& times,
                                 const Vec& y, FlowSample* out) const {
  base_->sample_many(times, wrap_vec(y + pre_), out);
  for (std::size_t k = 0; k < times.size(); ++k)
    out[k].position = wrap_vec(out[k].position + post_);
}

Vec ShiftedFlowMap::source_velocity(const Vec& y) const {
  return base_->source_velocity(wrap_vec(y + pre_));
}

}  // namespace rfl
