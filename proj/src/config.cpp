#include "rfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "rfl/csv.hpp"
#include "rfl/errors.hpp"

namespace rfl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string here = source + ":" + std::to_string(number);
    if (eq == std::string::npos)
      throw ConfigError(here + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(here + ": empty key");
    if (kv.entries_.count(key))
      throw ConfigError(here + ": " + key + ": duplicate key (first at line " +
                        std::to_string(kv.entries_[key].line) + ")");
    kv.entries_[key] = {trim(line.substr(eq + 1)), number};
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse(in, path);
}

const std::string& KeyValues::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(key + ": missing");
  return it->second.value;
}

std::string KeyValues::where(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end() || it->second.line == 0) return source_;
  return source_ + ":" + std::to_string(it->second.line);
}

std::vector<std::string> KeyValues::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  entries_[key].value = value;
}

std::string to_string(FlowMapKind k) {
  switch (k) {
    case FlowMapKind::automatic: return "auto";
    case FlowMapKind::solver: return "solver";
    case FlowMapKind::grid: return "grid";
  }
  return "?";
}

std::string to_string(EtaKind k) {
  switch (k) {
    case EtaKind::normal: return "normal";
    case EtaKind::constant: return "constant";
    case EtaKind::mollified_normal: return "mollified_normal";
  }
  return "?";
}

namespace {

// Typed readers; each failure becomes "key: message".
double to_real(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || s.empty())
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& s) {
  long long v = 0;
  const char* b = s.data();
  if (!s.empty() && s[0] == '+') ++b;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(b, end, v);
  if (r.ec != std::errc() || r.ptr != end || s.empty())
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<double> to_reals(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const std::string& item : split(s, ',')) out.push_back(to_real(key, item));
  return out;
}

Vec to_vec(const std::string& key, const std::string& s) {
  const auto v = to_reals(key, s);
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError(key + ": expected 1 to " + std::to_string(kMaxDim) +
                      " components");
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? ", " : "") + format_real(v[i]);
  return out;
}

std::string join_vec(const Vec& v) {
  return join_reals(std::vector<double>(v.data(), v.data() + v.size()));
}

std::string join_words(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string sink_name(SinkPolicy s) {
  return s == SinkPolicy::capture ? "capture" : "error";
}

SinkPolicy to_sink(const std::string& key, const std::string& s) {
  if (s == "error") return SinkPolicy::error;
  if (s == "capture") return SinkPolicy::capture;
  throw ConfigError(key + ": expected error or capture, got '" + s + "'");
}

template <class Parse>
auto enum_value(const std::string& key, const std::string& s, Parse parse) {
  try {
    return parse(s);
  } catch (const InvalidInput& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string levels_text(const std::vector<RefinementLevel>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i)
    out += (i ? ", " : "") + format_real(levels[i].epsilon) + ":" +
           std::to_string(levels[i].n_x) + ":" + std::to_string(levels[i].n_z);
  return out;
}

std::vector<RefinementLevel> to_levels(const std::string& key,
                                       const std::string& s) {
  std::vector<RefinementLevel> out;
  for (const std::string& item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3)
      throw ConfigError(key + ": expected epsilon:n_x:n_z, got '" + item + "'");
    out.push_back({to_real(key, parts[0]),
                   static_cast<int>(to_integer(key, parts[1])),
                   static_cast<int>(to_integer(key, parts[2]))});
  }
  return out;
}

}  // namespace

ScenarioConfig ScenarioConfig::from(const KeyValues& kv) {
  ScenarioConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"field", [&](auto&, auto& v) { c.field_id = v; }},
      {"dim", [&](auto& k, auto& v) { c.dim = static_cast<int>(to_integer(k, v)); }},
      {"seed",
       [&](auto& k, auto& v) {
         const long long s = to_integer(k, v);
         if (s < 0) throw ConfigError(k + ": must be >= 0");
         c.seed = static_cast<unsigned long long>(s);
       }},
      {"solver.method",
       [&](auto& k, auto& v) { c.solver.method = enum_value(k, v, parse_method); }},
      {"solver.h", [&](auto& k, auto& v) { c.solver.h = to_real(k, v); }},
      {"solver.event_tol",
       [&](auto& k, auto& v) { c.solver.event_tol = to_real(k, v); }},
      {"solver.max_crossings",
       [&](auto& k, auto& v) {
         c.solver.max_crossings = static_cast<int>(to_integer(k, v));
       }},
      {"solver.sink", [&](auto& k, auto& v) { c.solver.sink = to_sink(k, v); }},
      {"solver.start_side",
       [&](auto& k, auto& v) {
         c.solver.start_side = static_cast<int>(to_integer(k, v));
       }},
      {"flow.map",
       [&](auto& k, auto& v) {
         if (v == "auto") c.flow_map = FlowMapKind::automatic;
         else if (v == "solver") c.flow_map = FlowMapKind::solver;
         else if (v == "grid") c.flow_map = FlowMapKind::grid;
         else throw ConfigError(k + ": expected auto, solver or grid");
       }},
      {"flow.grid",
       [&](auto& k, auto& v) { c.flow_grid = static_cast<int>(to_integer(k, v)); }},
      {"pair.pre", [&](auto& k, auto& v) { c.pair_pre = to_vec(k, v); }},
      {"pair.post", [&](auto& k, auto& v) { c.pair_post = to_vec(k, v); }},
      {"pair.solver",
       [&](auto& k, auto& v) {
         if (v == "same") {
           c.pair_independent = false;
         } else {
           c.pair_independent = true;
           c.pair_solver.method = enum_value(k, v, parse_method);
         }
       }},
      {"pair.h", [&](auto& k, auto& v) { c.pair_solver.h = to_real(k, v); }},
      {"kernel.profile",
       [&](auto& k, auto& v) { c.profile = enum_value(k, v, parse_profile); }},
      {"kernel.eta",
       [&](auto& k, auto& v) {
         if (v == "normal") c.eta = EtaKind::normal;
         else if (v == "constant") c.eta = EtaKind::constant;
         else if (v == "mollified_normal") c.eta = EtaKind::mollified_normal;
         else
           throw ConfigError(k + ": expected normal, constant or mollified_normal");
       }},
      {"kernel.eta_vector", [&](auto& k, auto& v) { c.eta_vector = to_vec(k, v); }},
      {"kernel.eta_width", [&](auto& k, auto& v) { c.eta_width = to_real(k, v); }},
      {"kernel.eta_tilt", [&](auto& k, auto& v) { c.eta_tilt = to_real(k, v); }},
      {"functional.epsilon", [&](auto& k, auto& v) { c.epsilons = to_reals(k, v); }},
      {"functional.gamma", [&](auto& k, auto& v) { c.gammas = to_reals(k, v); }},
      {"functional.t", [&](auto& k, auto& v) { c.times = to_reals(k, v); }},
      {"functional.n_x",
       [&](auto& k, auto& v) { c.n_x = static_cast<int>(to_integer(k, v)); }},
      {"functional.n_z",
       [&](auto& k, auto& v) { c.n_z = static_cast<int>(to_integer(k, v)); }},
      {"functional.theta_nodes",
       [&](auto& k, auto& v) { c.theta_nodes = static_cast<int>(to_integer(k, v)); }},
      {"functional.dt_fd", [&](auto& k, auto& v) { c.dt_fd = to_real(k, v); }},
      {"functional.error_estimate",
       [&](auto& k, auto& v) { c.error_estimate = to_bool(k, v); }},
      {"functional.c_t", [&](auto& k, auto& v) { c.c_t = to_real(k, v); }},
      {"sweep.fit", [&](auto&, auto& v) { c.fit_columns = split(v, ','); }},
      {"uniqueness.enabled", [&](auto& k, auto& v) { c.uniqueness = to_bool(k, v); }},
      {"uniqueness.T", [&](auto& k, auto& v) { c.uniqueness_config.T = to_real(k, v); }},
      {"uniqueness.time_steps",
       [&](auto& k, auto& v) {
         c.uniqueness_config.time_steps = static_cast<int>(to_integer(k, v));
       }},
      {"uniqueness.n_x",
       [&](auto& k, auto& v) {
         c.uniqueness_config.n_x = static_cast<int>(to_integer(k, v));
       }},
      {"uniqueness.residual_times",
       [&](auto& k, auto& v) { c.uniqueness_config.residual_times = to_reals(k, v); }},
      {"uniqueness.levels",
       [&](auto& k, auto& v) { c.uniqueness_config.levels = to_levels(k, v); }},
      {"uniqueness.dt_fd",
       [&](auto& k, auto& v) { c.uniqueness_config.dt_fd = to_real(k, v); }},
      {"uniqueness.tolerance",
       [&](auto& k, auto& v) { c.uniqueness_config.tolerance = to_real(k, v); }},
      {"uniqueness.residual_on_first",
       [&](auto& k, auto& v) {
         c.uniqueness_config.residual_on_first = to_bool(k, v);
       }},
      {"output.dir", [&](auto&, auto& v) { c.output_dir = v; }},
  };

  // dim first: vector defaults depend on it.
  std::vector<std::string> order = kv.keys();
  std::stable_partition(order.begin(), order.end(),
                        [](const std::string& k) { return k == "dim"; });
  bool dim_done = false;
  for (const std::string& key : order) {
    if (!dim_done && key != "dim") {
      c.pair_pre = c.pair_post = Vec::Zero(c.dim);
      c.eta_vector = Vec::Zero(c.dim);
      c.eta_vector[0] = 1.0;
      dim_done = true;
    }
    const auto it = setters.find(key);
    try {
      if (it == setters.end()) throw ConfigError(key + ": unknown key");
      it->second(key, kv.raw(key));
    } catch (const ConfigError& e) {
      throw ConfigError(kv.where(key) + ": " + e.what());
    }
  }
  if (!dim_done) {
    c.pair_pre = c.pair_post = Vec::Zero(c.dim);
    c.eta_vector = Vec::Zero(c.dim);
    c.eta_vector[0] = 1.0;
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const std::string key = msg.substr(0, msg.find(':'));
    throw ConfigError(kv.where(key) + ": " + msg);
  }
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  return from(KeyValues::load(path));
}

KeyValues ScenarioConfig::to_key_values() const {
  KeyValues kv;
  kv.set("field", field_id);
  kv.set("dim", std::to_string(dim));
  kv.set("seed", std::to_string(seed));
  kv.set("solver.method", to_string(solver.method));
  kv.set("solver.h", format_real(solver.h));
  kv.set("solver.event_tol", format_real(solver.event_tol));
  kv.set("solver.max_crossings", std::to_string(solver.max_crossings));
  kv.set("solver.sink", sink_name(solver.sink));
  kv.set("solver.start_side", std::to_string(solver.start_side));
  kv.set("flow.map", to_string(flow_map));
  kv.set("flow.grid", std::to_string(flow_grid));
  kv.set("pair.pre", join_vec(pair_pre));
  kv.set("pair.post", join_vec(pair_post));
  kv.set("pair.solver",
         pair_independent ? to_string(pair_solver.method) : "same");
  kv.set("pair.h", format_real(pair_solver.h));
  kv.set("kernel.profile", to_string(profile));
  kv.set("kernel.eta", to_string(eta));
  kv.set("kernel.eta_vector", join_vec(eta_vector));
  kv.set("kernel.eta_width", format_real(eta_width));
  kv.set("kernel.eta_tilt", format_real(eta_tilt));
  kv.set("functional.epsilon", join_reals(epsilons));
  kv.set("functional.gamma", join_reals(gammas));
  kv.set("functional.t", join_reals(times));
  kv.set("functional.n_x", std::to_string(n_x));
  kv.set("functional.n_z", std::to_string(n_z));
  kv.set("functional.theta_nodes", std::to_string(theta_nodes));
  kv.set("functional.dt_fd", format_real(dt_fd));
  kv.set("functional.error_estimate", error_estimate ? "true" : "false");
  kv.set("functional.c_t", format_real(c_t));
  kv.set("sweep.fit", join_words(fit_columns));
  const UniquenessConfig& u = uniqueness_config;
  kv.set("uniqueness.enabled", uniqueness ? "true" : "false");
  kv.set("uniqueness.T", format_real(u.T));
  kv.set("uniqueness.time_steps", std::to_string(u.time_steps));
  kv.set("uniqueness.n_x", std::to_string(u.n_x));
  kv.set("uniqueness.residual_times", join_reals(u.residual_times));
  kv.set("uniqueness.levels", levels_text(u.levels));
  kv.set("uniqueness.dt_fd", format_real(u.dt_fd));
  kv.set("uniqueness.tolerance", format_real(u.tolerance));
  kv.set("uniqueness.residual_on_first", u.residual_on_first ? "true" : "false");
  kv.set("output.dir", output_dir);
  return kv;
}

void ScenarioConfig::write(std::ostream& out) const {
  const KeyValues kv = to_key_values();
  for (const std::string& k : kv.keys()) out << k << " = " << kv.raw(k) << '\n';
}

namespace {

const std::set<std::string>& fit_names() {
  static const std::set<std::string> names{
      "D", "I_eps_fd", "I1", "I2", "I2_a_limit", "singular_bound",
      "eqfin_residual", "error_bound"};
  return names;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!in_catalog(field_id))
    throw ConfigError("field: unknown catalog id '" + field_id + "'");
  if (dim < 2 || dim > kMaxDim)
    throw ConfigError("dim: must be 2 or 3");
  if (!(solver.h > 0.0) || !std::isfinite(solver.h))
    throw ConfigError("solver.h: must be positive");
  if (!(solver.event_tol > 0.0) || solver.event_tol > solver.h)
    throw ConfigError("solver.event_tol: must satisfy 0 < event_tol <= h");
  if (solver.max_crossings < 0)
    throw ConfigError("solver.max_crossings: must be >= 0");
  if (solver.start_side != 1 && solver.start_side != -1)
    throw ConfigError("solver.start_side: must be +1 or -1");
  if (field_id == "A" && solver.method == SolverMethod::explicit_exact)
    throw ConfigError("solver.method: field A has no closed-form flow");
  if (flow_grid < kGridStencil)
    throw ConfigError("flow.grid: must be >= " + std::to_string(kGridStencil));
  if (flow_map == FlowMapKind::grid && catalog(field_id, dim).has_jumps())
    throw ConfigError("flow.map: grid interpolation needs a field without jumps");
  if (pair_pre.size() != dim) throw ConfigError("pair.pre: needs dim components");
  if (pair_post.size() != dim)
    throw ConfigError("pair.post: needs dim components");
  if (!pair_pre.allFinite() || !pair_post.allFinite())
    throw ConfigError("pair.pre: components must be finite");
  if (pair_independent) {
    if (!(pair_solver.h > 0.0)) throw ConfigError("pair.h: must be positive");
    if (field_id == "A" && pair_solver.method == SolverMethod::explicit_exact)
      throw ConfigError("pair.solver: field A has no closed-form flow");
  }
  if (eta_vector.size() != dim || !(eta_vector.norm() > 0.0))
    throw ConfigError("kernel.eta_vector: needs dim components, not all zero");
  if (!std::isfinite(eta_width) || !std::isfinite(eta_tilt))
    throw ConfigError("kernel.eta_width: must be finite");
  if (epsilons.empty()) throw ConfigError("functional.epsilon: list is empty");
  if (gammas.empty()) throw ConfigError("functional.gamma: list is empty");
  if (times.empty()) throw ConfigError("functional.t: list is empty");
  for (double e : epsilons)
    if (!(e > 0.0) || e >= 0.5)
      throw ConfigError("functional.epsilon: each value must lie in (0, 1/2)");
  for (double g : gammas)
    if (!(g >= 0.0) || !std::isfinite(g))
      throw ConfigError("functional.gamma: each value must be >= 0");
  for (double t : times)
    if (!std::isfinite(t)) throw ConfigError("functional.t: must be finite");
  if (n_x < 2) throw ConfigError("functional.n_x: must be >= 2");
  if (n_z < 2) throw ConfigError("functional.n_z: must be >= 2");
  if (theta_nodes < 0) throw ConfigError("functional.theta_nodes: must be >= 0");
  if (!(dt_fd > 0.0)) throw ConfigError("functional.dt_fd: must be positive");
  if (!(c_t >= 0.0)) throw ConfigError("functional.c_t: must be >= 0");
  for (const std::string& f : fit_columns)
    if (!fit_names().count(f))
      throw ConfigError("sweep.fit: unknown column '" + f + "'");
  const UniquenessConfig& u = uniqueness_config;
  if (!(u.T > 0.0)) throw ConfigError("uniqueness.T: must be positive");
  if (u.time_steps < 1) throw ConfigError("uniqueness.time_steps: must be >= 1");
  if (u.n_x < 2) throw ConfigError("uniqueness.n_x: must be >= 2");
  if (u.levels.empty()) throw ConfigError("uniqueness.levels: list is empty");
  for (const RefinementLevel& l : u.levels)
    if (!(l.epsilon > 0.0) || l.epsilon >= 0.5 || l.n_x < 2 || l.n_z < 2)
      throw ConfigError("uniqueness.levels: bad level");
  if (u.residual_times.empty())
    throw ConfigError("uniqueness.residual_times: list is empty");
  if (!(u.dt_fd > 0.0)) throw ConfigError("uniqueness.dt_fd: must be positive");
  if (!(u.tolerance >= 0.0))
    throw ConfigError("uniqueness.tolerance: must be >= 0");
  if (output_dir.empty()) throw ConfigError("output.dir: must not be empty");
  // Kernel support must fit the torus for every epsilon.
  for (double e : epsilons) functional(e, times.front()).validate(kernel(0.0));
}

AnisotropicKernel ScenarioConfig::kernel(double gamma) const {
  const PiecewiseField& f = catalog(field_id, dim);
  const BumpProfile p(profile, dim);
  switch (eta) {
    case EtaKind::normal: {
      Vec n = Vec::Zero(dim);
      n[0] = 1.0;
      if (f.has_jumps()) n = f.jumps()[0].normal();
      return AnisotropicKernel(p, DirectionField::constant(n), gamma);
    }
    case EtaKind::constant:
      return AnisotropicKernel(p, DirectionField::constant(eta_vector), gamma);
    case EtaKind::mollified_normal:
      return AnisotropicKernel(
          p, DirectionField::mollified_normal(eta_vector, eta_width, eta_tilt),
          gamma);
  }
  throw InvalidInput("bad eta kind");
}

FunctionalConfig ScenarioConfig::functional(double epsilon, double t) const {
  FunctionalConfig c;
  c.epsilon = epsilon;
  c.n_x = n_x;
  c.n_z = n_z;
  c.theta_nodes = theta_nodes;
  c.t = t;
  c.dt_fd = dt_fd;
  return c;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  std::ostringstream x, y;
  a.write(x);
  b.write(y);
  return x.str() == y.str();
}

}  // namespace rfl
