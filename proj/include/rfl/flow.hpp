#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rfl/fields.hpp"

namespace rfl {

enum class SolverMethod { rk4_event, explicit_exact };
std::string to_string(SolverMethod m);
SolverMethod parse_method(const std::string& s);

/// What to do when both one-sided fields push a trajectory into a jump
/// surface. `capture` keeps the trajectory on the surface when the sliding
/// velocity vanishes (the only forward continuation); `error` raises
/// NonTransversalCrossing.
enum class SinkPolicy { error, capture };

struct FlowSolverConfig {
  double h = 1e-3;
  SolverMethod method = SolverMethod::rk4_event;
  double event_tol = 1e-12;
  int max_crossings = 1000;
  SinkPolicy sink = SinkPolicy::error;
  /// Side (+1 along eta_b, -1 against) used to nudge starting points that lie
  /// on a jump surface.
  int start_side = +1;

  void validate() const;
};

/// Offset applied along eta_b to starting points that sit on a jump.
inline constexpr double kStartNudge = 1e-9;

/// State of one trajectory. `lifted` is the position in R^N (not wrapped).
struct TrajectoryState {
  Vec lifted;
  double log_jacobian = 0.0;
  bool captured = false;
  int crossings = 0;
  bool nudged = false;
};

/// Sees (signed time, lifted position, active piece) at every accepted node;
/// crossings are reported once per side, captured states with piece -1.
using TrajectoryObserver = std::function<void(double, const Vec&, int)>;

/// Integrates one trajectory from x over signed time t.
TrajectoryState integrate_point(const PiecewiseField& field,
                                const FlowSolverConfig& config, const Vec& x,
                                double t,
                                const TrajectoryObserver& observer = nullptr);

/// Trajectories X(t, x_i) with log-Jacobians for a grid of starting points.
struct FlowEnsemble {
  std::string field_id;
  int dim = 2;
  FlowSolverConfig config;
  IVec grid_counts;                  // starting points form this torus grid
  std::vector<Vec> initial_points;
  std::vector<double> times;         // sorted ascending, contains 0
  std::vector<std::vector<Vec>> displacement;       // [time][point], lifted
  std::vector<std::vector<double>> log_jacobian;    // [time][point]
  std::vector<std::vector<unsigned char>> captured; // [time][point]
  std::size_t nudged_starts = 0;

  std::size_t size() const { return initial_points.size(); }
  /// Index of time t (exact match within 1e-12); -1 when absent.
  int time_index(double t) const;
  int require_time(double t) const;
  Vec position(int time_idx, std::size_t point) const {
    return wrap_vec(initial_points[point] + displacement[time_idx][point]);
  }
};

/// Integrates every point of the m^N (or per-axis counts) cell-centred
/// torus grid to each requested time. Each time is reached directly from
/// t = 0, so X(0 + t) is bit-identical to re-integrating from X(0).
FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config,
                            const IVec& grid_counts, std::vector<double> times);
FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config, int m,
                            std::vector<double> times);
/// Same, for an explicit list of starting points (grid_counts left empty).
FlowEnsemble integrate_flow(const PiecewiseField& field,
                            const FlowSolverConfig& config,
                            std::vector<Vec> initial_points,
                            std::vector<double> times);

/// Density values on a uniform cell-centred torus grid.
struct DensityField {
  double t = 0.0;
  IVec counts;
  std::vector<double> values;

  double mean() const;
  double min() const;
  double max() const;
  /// Averages blocks of cells down to `bins` per axis (counts must divide).
  DensityField coarsen(int bins) const;
};

/// Density of X(t, .)_# lambda sampled on the ensemble grid,
/// exp(log J(-t, x_i)); needs -t among the ensemble times.
DensityField density_from_flow(const FlowEnsemble& ensemble, double t);
/// Density of X(-t, .)_# lambda, exp(log J(t, x_i)) (the weight mu(t, .)).
DensityField transport_weight(const FlowEnsemble& ensemble, double t);
/// Bin-count estimate of the density of X(t, .)_# lambda; empty bins are 0.
DensityField pushforward_histogram(const FlowEnsemble& ensemble, double t,
                                   int bins);

/// max_i |X(t, X(s, x_i)) - X(s + t, x_i)| over the ensemble points.
double check_group_property(const PiecewiseField& field,
                            const FlowEnsemble& ensemble, double s, double t);
/// |X(t, x) - x - int_0^t b(X(s, x)) ds| with the trapezoid rule over the
/// solver nodes.
double check_ode_residual(const PiecewiseField& field,
                          const FlowSolverConfig& config, const Vec& x,
                          double t);

/// CSV with columns t, x0_1..x0_N, x_1..x_N, logJ.
void write_ensemble_csv(const FlowEnsemble& ensemble, std::ostream& out);

struct FlowSample {
  Vec position;  // wrapped onto the torus
  double log_jacobian = 0.0;
};

/// A flow evaluated at arbitrary points. `source_velocity(y)` is the field
/// at the point the trajectory through y starts from, which is what the
/// discrepancy identities differentiate.
class FlowMap {
 public:
  virtual ~FlowMap() = default;
  virtual const PiecewiseField& field() const = 0;
  virtual FlowSample sample(double t, const Vec& y) const = 0;
  /// sample() at several times for one point.
  virtual void sample_many(const std::vector<double>& times, const Vec& y,
                           FlowSample* out) const {
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = sample(times[i], y);
  }
  virtual Vec source_velocity(const Vec& y) const { return field().value(y); }
  int dim() const { return field().dim(); }
};

/// Integrates trajectories on demand with the given solver.
class SolverFlowMap : public FlowMap {
 public:
  SolverFlowMap(const PiecewiseField& field, FlowSolverConfig config);
  const PiecewiseField& field() const override { return *field_; }
  FlowSample sample(double t, const Vec& y) const override;
  void sample_many(const std::vector<double>& times, const Vec& y,
                   FlowSample* out) const override;

 private:
  const PiecewiseField* field_;
  FlowSolverConfig config_;
};

/// Points per axis of the interpolation stencil (degree 5 Lagrange).
inline constexpr int kGridStencil = 6;

/// Periodic tensor Lagrange interpolation of an ensemble of a smooth field.
/// Only the ensemble times can be evaluated; the ensemble must outlive the
/// map.
class GridFlowMap : public FlowMap {
 public:
  GridFlowMap(const PiecewiseField& field, const FlowEnsemble& ensemble);
  const PiecewiseField& field() const override { return *field_; }
  FlowSample sample(double t, const Vec& y) const override;
  void sample_many(const std::vector<double>& times, const Vec& y,
                   FlowSample* out) const override;

 private:
  static constexpr int kPacked = 4;  // displacement (padded to 3), log J
  const PiecewiseField* field_;
  const FlowEnsemble* ensemble_;
  std::vector<std::vector<double>> table_;  // [time][point * kPacked]
};

/// Y_t(y) = X_t(y + pre) + post for a base flow X. With `post` = 0 and b
/// invariant under `pre`, Y is again a flow of b with shifted initial data.
class ShiftedFlowMap : public FlowMap {
 public:
  ShiftedFlowMap(std::shared_ptr<const FlowMap> base, Vec pre, Vec post);
  const PiecewiseField& field() const override { return base_->field(); }
  FlowSample sample(double t, const Vec& y) const override;
  void sample_many(const std::vector<double>& times, const Vec& y,
                   FlowSample* out) const override;
  Vec source_velocity(const Vec& y) const override;

 private:
  std::shared_ptr<const FlowMap> base_;
  Vec pre_, post_;
};

}  // namespace rfl
