#pragma once

#include <string>
#include <vector>

#include "rfl/flow.hpp"
#include "rfl/kernels.hpp"

namespace rfl {

struct FunctionalConfig {
  double epsilon = 0.05;
  int n_x = 64;         // torus grid points per axis for x
  int n_z = 64;         // kernel-aligned grid points per axis for z
  int theta_nodes = 8;  // Gauss-Legendre nodes for the segment average; 0 skips
  double t = 0.0;
  double dt_fd = 1e-3;

  /// ConfigError naming the offending key.
  void validate(const AnisotropicKernel& kernel) const;
};

/// The (x, z) integrals at one time, sharing the flow samples.
struct FunctionalTerms {
  double D = 0.0;
  double I1 = 0.0;
  double I2 = 0.0;
  /// Segment-averaged absolutely continuous part of I2 at finite epsilon.
  double I2_a = 0.0;
};

/// int int |X_t(x) - Y_t(x + eps z)| rho(x, z) mu1(t, x) mu2(t, x + eps z).
double discrepancy_D(const FlowMap& X, const FlowMap& Y,
                     const AnisotropicKernel& kernel,
                     const FunctionalConfig& config, double t);
/// D, I1, I2 and I2_a at config.t.
FunctionalTerms functional_terms(const FlowMap& X, const FlowMap& Y,
                                 const AnisotropicKernel& kernel,
                                 const FunctionalConfig& config);
/// (D(t + dt) - D(t - dt)) / (2 dt).
double I_eps_fd(const FlowMap& X, const FlowMap& Y,
                const AnisotropicKernel& kernel, const FunctionalConfig& config);
double I1(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
          const FunctionalConfig& config);
double I2(const FlowMap& X, const FlowMap& Y, const AnisotropicKernel& kernel,
          const FunctionalConfig& config);

/// int |X_t - Y_t| div^a b mu1 mu2 dx on an n^N torus grid: the limit of I2
/// (and of I_eps) as eps -> 0.
double I2_a_limit(const FlowMap& X, const FlowMap& Y, double t, int n);
/// int |X_t - Y_t| mu1 mu2 dx on an n^N torus grid.
double flow_discrepancy(const FlowMap& X, const FlowMap& Y, double t, int n);

/// int d2rho(x, z) . (grad_a b(x) z) dz + div^a b(x); zero in exact
/// arithmetic. OnJumpError when x is on a jump.
double R_a_check(const PiecewiseField& field, const AnisotropicKernel& kernel,
                 const Vec& x, int n_z = 256);

/// 2 C_t^2 sum over jump components of
/// int_Sigma sigma int_z |<d2rho(x, z), xi_b> <eta_b, z>| dz dH(x).
double singular_bound(const PiecewiseField& field,
                      const AnisotropicKernel& kernel, double C_t,
                      int n_surface = 16, int n_z = 128);
/// Explicit majorant of singular_bound:
/// 2 C_t^2 K0 (|D^s b| / (1 + gamma) + 2 (1 + 2 gamma) int |eta - eta_b| d|D^s b|)
/// with K0 = derivative_moment(profile).
double singular_bound_majorant(const PiecewiseField& field,
                               const AnisotropicKernel& kernel, double C_t,
                               int n_surface = 16);
/// int |eta - eta_b| d|D^s b| by surface quadrature.
double misalignment_mass(const PiecewiseField& field,
                         const DirectionField& eta, int n_surface = 16);

struct ScalarBoundStats {
  int samples = 0;
  int violations = 0;
  double worst_margin = 0.0;  // min over samples of rhs - lhs
};
/// Pointwise checks of |<z, U xi_b>| <= (1 + gamma |eta - eta_b|) |z| and
/// |<eta_b, U^-1 z>| <= (|eta - eta_b| + 1/(1 + gamma)) |z| at random jump
/// nodes, z in the unit ball, gamma in [0, 1000], misalignment in [0, 0.5].
ScalarBoundStats check_scalar_bounds(const PiecewiseField& field, int samples,
                                     unsigned long long seed);

struct TradeoffRow {
  double gamma;
  double delta;
  double envelope;
};
/// 1/(1 + gamma) + (1 + 2 gamma) err(delta), err(delta) = delta * |D^s b|.
double tradeoff_envelope(double gamma, double delta, double singular_mass);
struct TradeoffTable {
  std::vector<TradeoffRow> grid;
  TradeoffRow best;
  /// Envelope along gamma_k = k, delta_k = k^-2, k = 1..diagonal_length.
  std::vector<double> diagonal;
};
TradeoffTable gamma_eta_tradeoff(const PiecewiseField& field,
                                 const std::vector<double>& gammas,
                                 const std::vector<double>& deltas,
                                 int diagonal_length = 100);

struct TraceResult {
  double trace = 0.0;
  double infimum = 0.0;      // min over the family of int |<Mz, grad rho>|
  double best_gamma = 0.0;
  Vec best_eta;
  double min_margin = 0.0;   // min over the family of value - |tr M|
  double max_identity_error = 0.0;  // max |int <Mz, grad rho> + tr M|
};
/// int |<M z, grad rho(z)>| dz for one kernel frozen at a point.
double trace_integral(const Mat& M, const LocalKernel& kernel, int n_z,
                      double* signed_integral = nullptr);
/// Minimises over gamma in `gammas` and eta over `angles` directions (N = 2:
/// angles in [0, pi); N = 3: a Fibonacci half sphere).
TraceResult trace_identity(const Mat& M, const BumpProfile& profile,
                           const std::vector<double>& gammas, int angles,
                           int n_z = 128);

/// One row per (field, epsilon, gamma, t).
struct DiscrepancyReport {
  std::string field_id;
  double epsilon = 0.0;
  double gamma = 0.0;
  double t = 0.0;
  int n_x = 0;
  int n_z = 0;
  double D = 0.0;
  double I_eps_fd = 0.0;
  double I1 = 0.0;
  double I2 = 0.0;
  double I2_a_limit = 0.0;
  double singular_bound = 0.0;
  double eqfin_residual = 0.0;
  /// Estimate for |I_eps_fd - (I1 + I2)|: grid-halving differences of the
  /// three quantities plus a step-doubling estimate of the central difference.
  double error_bound = 0.0;
};

std::vector<std::string> report_csv_header();
std::vector<std::string> report_csv_row(const DiscrepancyReport& r);

struct ReportOptions {
  /// C(t) for the singular bound; <= 0 measures max(sup mu1, sup mu2) on the
  /// x grid.
  double C_t = 0.0;
  bool error_estimate = true;
};

DiscrepancyReport discrepancy_report(const FlowMap& X, const FlowMap& Y,
                                     const AnisotropicKernel& kernel,
                                     const FunctionalConfig& config,
                                     const ReportOptions& options = {});

enum class Verdict { unique, not_unique, hypotheses_violated };
std::string to_string(Verdict v);

struct RefinementLevel {
  double epsilon;
  int n_x;
  int n_z;
};

struct UniquenessConfig {
  double T = 1.0;
  int time_steps = 4;   // discrepancy sampled at k T / time_steps
  int n_x = 64;         // grid for int |X - Y| mu1 mu2
  std::vector<double> residual_times{0.2, 0.45, 0.7};
  std::vector<RefinementLevel> levels{
      {0.1, 32, 16}, {0.05, 64, 24}, {0.025, 128, 32}};
  double dt_fd = 1e-3;
  double tolerance = 1e-5;
  /// Evaluate the refinement levels on (X, X) instead of (X, Y). The kernel
  /// sweeps sample the second flow off-grid at every (x, z) node, which is
  /// only affordable for closed-form or interpolated flows.
  bool residual_on_first = true;
};

struct UniquenessReport {
  std::vector<double> times;
  std::vector<double> discrepancy;     // int |X_t - Y_t| mu1 mu2
  /// Per refinement level: max over residual_times of
  /// |I_eps_fd - int |X - Y| div^a b mu1 mu2|.
  std::vector<double> eqfin_residual;
  std::vector<DiscrepancyReport> rows;
  double gronwall_bound = 0.0;
  double final_discrepancy = 0.0;
  Verdict verdict = Verdict::not_unique;
  std::string reason;
};

/// Returns hypotheses_violated (without running the pipeline) for fields
/// whose jumps carry singular divergence.
UniquenessReport uniqueness_report(const FlowMap& X, const FlowMap& Y,
                                   const AnisotropicKernel& kernel,
                                   const UniquenessConfig& config);

/// Two backward continuations of the forward compressive flow: the state at
/// time t (captured points included) is run back by -t with the start side
/// +1 and -1. Returns the mean distance between the branches over an m^N
/// grid of initial points.
double branch_discrepancy(const PiecewiseField& field, double t, int m);

}  // namespace rfl
