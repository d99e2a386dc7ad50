#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rfl/flow.hpp"
#include "rfl/functionals.hpp"
#include "rfl/kernels.hpp"

namespace rfl {

/// Flat `key = value` file. Keys use dotted sections ("solver.h"); `#`
/// starts a comment; blank lines are ignored. Duplicate keys are an error.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Raw value; ConfigError when absent.
  const std::string& raw(const std::string& key) const;
  /// "source:line" for diagnostics, or the source alone for unknown keys.
  std::string where(const std::string& key) const;
  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }

  void set(const std::string& key, const std::string& value);

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string source_;
  std::map<std::string, Entry> entries_;
};

enum class FlowMapKind { automatic, solver, grid };
std::string to_string(FlowMapKind k);

enum class EtaKind { normal, constant, mollified_normal };
std::string to_string(EtaKind k);

struct ScenarioConfig {
  std::string field_id = "C";
  int dim = 2;
  unsigned long long seed = 1;

  FlowSolverConfig solver;
  /// How flows are sampled off-grid: `grid` interpolates an ensemble (smooth
  /// fields only), `solver` integrates per point, `automatic` picks grid for
  /// fields without a closed form.
  FlowMapKind flow_map = FlowMapKind::automatic;
  int flow_grid = 128;

  /// Y_t(y) = Z_t(y + pre) + post, Z = X or an independent solver.
  Vec pair_pre;
  Vec pair_post;
  bool pair_independent = false;
  FlowSolverConfig pair_solver;

  ProfileKind profile = ProfileKind::smooth_exp;
  /// `normal`: constant, equal to the normal of the first jump component
  /// (e1 for fields without jumps); `constant`: eta_vector;
  /// `mollified_normal`: eta_vector rotated by tilt + width sin 2 pi x2.
  EtaKind eta = EtaKind::normal;
  Vec eta_vector;
  double eta_width = 0.3;
  double eta_tilt = 0.0;

  std::vector<double> epsilons{0.05};
  std::vector<double> gammas{0.0};
  std::vector<double> times{0.5};
  int n_x = 64;
  int n_z = 64;
  int theta_nodes = 0;
  double dt_fd = 1e-3;
  bool error_estimate = true;
  /// C(t) for the singular bound; 0 measures it.
  double c_t = 0.0;

  /// Quantities fitted in sweep.csv.
  std::vector<std::string> fit_columns{"singular_bound", "I1", "D"};

  bool uniqueness = false;
  UniquenessConfig uniqueness_config;

  std::string output_dir = "out";

  static ScenarioConfig from(const KeyValues& kv);
  static ScenarioConfig load(const std::string& path);
  /// Every key with its resolved value; parses back to an equal config.
  KeyValues to_key_values() const;
  void write(std::ostream& out) const;
  /// ConfigError naming the key.
  void validate() const;

  AnisotropicKernel kernel(double gamma) const;
  FunctionalConfig functional(double epsilon, double t) const;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace rfl
