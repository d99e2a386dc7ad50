#include "rfl/fields.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>

namespace rfl {

std::string to_string(FieldClass c) {
  switch (c) {
    case FieldClass::smooth: return "smooth";
    case FieldClass::sobolev_W11: return "sobolev_W11";
    case FieldClass::bv: return "bv";
    case FieldClass::pathological: return "pathological";
  }
  return "unknown";
}

Vec JumpComponent::normal() const {
  Vec n = wavevector.cast<double>();
  return n / n.norm();
}

Vec JumpComponent::jump_direction() const {
  const Vec d = plus_trace - minus_trace;
  return d / d.norm();
}

double JumpComponent::level(const Vec& x) const {
  return min_image_coordinate(x.dot(wavevector.cast<double>()) - offset);
}

double JumpComponent::area() const { return wavevector.cast<double>().norm(); }

PiecewiseField::PiecewiseField(std::string id, int dim,
                               FieldClass classification,
                               std::string description,
                               std::vector<FieldPiece> pieces,
                               std::vector<JumpComponent> jumps)
    : id_(std::move(id)), dim_(dim), class_(classification),
      description_(std::move(description)), pieces_(std::move(pieces)),
      jumps_(std::move(jumps)) {}

int PiecewiseField::jump_at(const Vec& x, double tol) const {
  for (std::size_t j = 0; j < jumps_.size(); ++j)
    if (std::abs(jumps_[j].level(x)) <= tol) return static_cast<int>(j);
  return -1;
}

int PiecewiseField::locate(const Vec& x) const {
  for (std::size_t p = 0; p + 1 < pieces_.size(); ++p)
    if (pieces_[p].contains(x)) return static_cast<int>(p);
  return static_cast<int>(pieces_.size()) - 1;
}

namespace {

void check_point_dim(const PiecewiseField& f, const TorusPoint& x) {
  if (x.dim() != f.dim())
    throw InvalidInput("point dimension " + std::to_string(x.dim()) +
                       " does not match field " + f.id());
}

[[noreturn]] void throw_on_jump(const PiecewiseField& f, int j) {
  const auto& jump = f.jumps()[j];
  throw OnJumpError("point lies on jump component " + std::to_string(j) +
                        " of field " + f.id(),
                    jump.minus_trace, jump.plus_trace, j);
}

}  // namespace

Vec PiecewiseField::eval_b(const TorusPoint& x) const {
  check_point_dim(*this, x);
  if (const int j = jump_at(x.coords()); j >= 0) throw_on_jump(*this, j);
  return value(x.coords());
}

Mat PiecewiseField::grad_a(const TorusPoint& x) const {
  check_point_dim(*this, x);
  if (const int j = jump_at(x.coords()); j >= 0) throw_on_jump(*this, j);
  return jacobian(x.coords());
}

double PiecewiseField::div_a(const TorusPoint& x) const {
  return grad_a(x).trace();
}

JumpData PiecewiseField::jump_data(const TorusPoint& x) const {
  check_point_dim(*this, x);
  const int j = jump_at(x.coords());
  if (j < 0) throw NoJumpError("point is on no jump surface of field " + id_);
  const auto& jump = jumps_[j];
  return {jump.jump_direction(), jump.normal(), jump.density()};
}

double PiecewiseField::singular_mass() const {
  double m = 0.0;
  for (const auto& j : jumps_) m += j.density() * j.area();
  return m;
}

// ---------------------------------------------------------------- catalog

namespace {

Vec lift2(int dim, double a, double b) {
  Vec v = Vec::Zero(dim);
  v[0] = a;
  v[1] = b;
  return v;
}

IVec wave2(int dim, int k1, int k2) {
  IVec k = IVec::Zero(dim);
  k[0] = k1;
  k[1] = k2;
  return k;
}

// Fractional part of <x, k> for an integer wavevector.
double phase(const Vec& x, const IVec& k) {
  return wrap_coordinate(x.dot(k.cast<double>()));
}

FieldPiece constant_piece(std::string name, std::function<bool(const Vec&)> in,
                          Vec value) {
  const int dim = static_cast<int>(value.size());
  return {std::move(name), std::move(in),
          [value](const Vec&) { return value; },
          [dim](const Vec&) -> Mat { return Mat::Zero(dim, dim); }};
}

// b = +v on {<x,k> mod 1 in (0,1/2)}, -v on (1/2,1); jumps at offsets 0, 1/2.
std::pair<std::vector<FieldPiece>, std::vector<JumpComponent>> two_phase(
    const IVec& k, const Vec& v) {
  std::vector<FieldPiece> pieces;
  pieces.push_back(constant_piece(
      "phase<1/2", [k](const Vec& x) { return phase(x, k) < 0.5; }, v));
  pieces.push_back(constant_piece(
      "phase>1/2", [k](const Vec& x) { return phase(x, k) >= 0.5; }, -v));
  std::vector<JumpComponent> jumps;
  jumps.push_back({k, 0.0, -v, v});
  jumps.push_back({k, 0.5, v, -v});
  return {std::move(pieces), std::move(jumps)};
}

}  // namespace

const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids{"A", "B", "C", "D", "E"};
  return ids;
}

bool in_catalog(std::string_view id) {
  const auto& ids = catalog_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

PiecewiseField make_field(std::string_view id, int dim) {
  if (dim < 2 || dim > kMaxDim)
    throw InvalidInput("catalog fields need 2 <= dim <= " +
                       std::to_string(kMaxDim));
  const auto always = [](const Vec&) { return true; };

  if (id == "A") {
    FieldPiece p{"all", always,
                 [dim](const Vec& x) {
                   return lift2(dim, -std::sin(kTwoPi * x[1]),
                                std::sin(kTwoPi * x[0]));
                 },
                 [dim](const Vec& x) -> Mat {
                   Mat m = Mat::Zero(dim, dim);
                   m(0, 1) = -kTwoPi * std::cos(kTwoPi * x[1]);
                   m(1, 0) = kTwoPi * std::cos(kTwoPi * x[0]);
                   return m;
                 }};
    PiecewiseField f("A", dim, FieldClass::smooth,
                     "b=(-sin 2pi x2, sin 2pi x1); smooth, divergence free",
                     {p}, {});
    f.div_sup_ = 0.0;
    return f;
  }
  if (id == "B") {
    FieldPiece p{"all", always,
                 [dim](const Vec& x) {
                   return lift2(dim, std::sin(kTwoPi * x[0]), 0.0);
                 },
                 [dim](const Vec& x) -> Mat {
                   Mat m = Mat::Zero(dim, dim);
                   m(0, 0) = kTwoPi * std::cos(kTwoPi * x[0]);
                   return m;
                 }};
    PiecewiseField f("B", dim, FieldClass::smooth,
                     "b=(sin 2pi x1, 0); smooth, div = 2pi cos 2pi x1", {p},
                     {});
    f.div_sup_ = kTwoPi;
    return f;
  }
  if (id == "C" || id == "D") {
    const IVec k = id == "C" ? wave2(dim, 1, 0) : wave2(dim, 2, 1);
    // Unit tangent: k rotated by +pi/2.
    Vec tangent = lift2(dim, -k[1], k[0]);
    tangent /= tangent.norm();
    auto [pieces, jumps] = two_phase(k, tangent);
    PiecewiseField f(
        std::string(id), dim, FieldClass::bv,
        id == "C" ? "shear b=(0,+1) on x1 in (0,1/2), (0,-1) on (1/2,1)"
                  : "shear along k=(2,1): b=+t on <x,k> mod 1 in (0,1/2), "
                    "-t otherwise, t=(-1,2)/sqrt5",
        std::move(pieces), std::move(jumps));
    f.div_sup_ = 0.0;
    f.piecewise_constant_ = true;
    return f;
  }
  if (id == "E") {
    const IVec k = wave2(dim, 1, 0);
    auto [pieces, jumps] = two_phase(k, lift2(dim, 1.0, 0.0));
    PiecewiseField f("E", dim, FieldClass::pathological,
                     "compressive b=(+1,0) on x1 in (0,1/2), (-1,0) on "
                     "(1/2,1); singular divergence",
                     std::move(pieces), std::move(jumps));
    f.div_sup_ = 0.0;
    f.piecewise_constant_ = true;
    return f;
  }
  throw InvalidInput("unknown catalog field '" + std::string(id) + "'");
}

const PiecewiseField& catalog(std::string_view id, int dim) {
  static std::mutex mutex;
  static std::map<std::pair<std::string, int>,
                  std::unique_ptr<PiecewiseField>>
      cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(std::string(id), dim);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache
             .emplace(key, std::make_unique<PiecewiseField>(make_field(id, dim)))
             .first;
  return *it->second;
}

// ---------------------------------------------------------------- surfaces

std::vector<SurfaceNode> surface_nodes(const JumpComponent& jump, int dim,
                                       int n) {
  // Solve <x,k> = c + j for the coordinate with the smallest nonzero |k_m|;
  // each of the |k_m| sheets is a graph over the remaining coordinates.
  int m = -1;
  for (int d = 0; d < dim; ++d)
    if (jump.wavevector[d] != 0 &&
        (m < 0 || std::abs(jump.wavevector[d]) < std::abs(jump.wavevector[m])))
      m = d;
  if (m < 0) throw InvalidInput("zero wavevector");
  const int km = jump.wavevector[m];
  const int sheets = std::abs(km);
  const int tangential = dim - 1;
  std::size_t per_sheet = 1;
  for (int d = 0; d < tangential; ++d) per_sheet *= static_cast<std::size_t>(n);
  const double weight =
      jump.area() / sheets / static_cast<double>(per_sheet);

  std::vector<SurfaceNode> nodes;
  nodes.reserve(per_sheet * sheets);
  for (int s = 0; s < sheets; ++s) {
    for (std::size_t i = 0; i < per_sheet; ++i) {
      Vec x(dim);
      std::size_t rest = i;
      double partial = 0.0;
      for (int d = dim - 1; d >= 0; --d) {
        if (d == m) continue;
        const int idx = static_cast<int>(rest % n);
        rest /= n;
        x[d] = (idx + 0.5) / n;
        partial += jump.wavevector[d] * x[d];
      }
      x[m] = wrap_coordinate((jump.offset + s - partial) / km);
      nodes.push_back({x, weight});
    }
  }
  return nodes;
}

double surface_quadrature(const JumpComponent& jump, int dim,
                          const std::function<double(const Vec&)>& g, int n) {
  CompensatedSum sum;
  const double sigma = jump.density();
  for (const auto& node : surface_nodes(jump, dim, n))
    sum.add(g(node.point) * sigma * node.weight);
  return sum.value();
}

double surface_quadrature(const PiecewiseField& field,
                          const std::function<double(const Vec&)>& g, int n) {
  CompensatedSum sum;
  for (const auto& jump : field.jumps())
    sum.add(surface_quadrature(jump, field.dim(), g, n));
  return sum.value();
}

// ---------------------------------------------------------- volume rules

namespace {

// Integers (s, t) with a*s + b*t = gcd(a, b).
std::pair<long, long> extended_gcd(long a, long b) {
  long s0 = 1, s1 = 0, t0 = 0, t1 = 1;
  while (b != 0) {
    const long q = a / b;
    std::tie(a, b) = std::make_pair(b, a - q * b);
    std::tie(s0, s1) = std::make_pair(s1, s0 - q * s1);
    std::tie(t0, t1) = std::make_pair(t1, t0 - q * t1);
  }
  if (a < 0) return {-s0, -t0};
  return {s0, t0};
}

}  // namespace

PieceAdaptedRule::PieceAdaptedRule(const PiecewiseField& field, int n)
    : dim_(field.dim()), n_(n) {
  if (n < 2) throw InvalidInput("adapted rule needs n >= 2");
  to_x_ = Mat::Identity(dim_, dim_);
  std::vector<double> breaks{0.0};
  if (field.has_jumps()) {
    const IVec& k = field.jumps().front().wavevector;
    for (const auto& j : field.jumps()) {
      if (j.wavevector != k)
        throw InvalidInput("adapted rule needs a single jump wavevector");
      breaks.push_back(wrap_coordinate(j.offset));
    }
    for (int d = 2; d < dim_; ++d)
      if (k[d] != 0)
        throw InvalidInput("adapted rule supports wavevectors in (e1, e2)");
    // Unimodular A with first row k; x = A^{-1} u.
    const auto [s, t] = extended_gcd(k[0], k[1]);
    if (k[0] * s + k[1] * t != 1)
      throw InvalidInput("jump wavevector must be primitive");
    // A = [[k0, k1], [-t, s]], det = k0 s + k1 t = 1.
    Mat inv = Mat::Identity(dim_, dim_);
    inv(0, 0) = static_cast<double>(s);
    inv(0, 1) = static_cast<double>(-k[1]);
    inv(1, 0) = static_cast<double>(t);
    inv(1, 1) = static_cast<double>(k[0]);
    to_x_ = inv;
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.push_back(1.0);

  // About n nodes along u1 in total, in panels of 8 Gauss points.
  constexpr int kOrder = 8;
  const GaussRule gauss = gauss_legendre(kOrder);
  const int panels_total = std::max<int>(static_cast<int>(breaks.size()) - 1,
                                         (n + kOrder - 1) / kOrder);
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double a = breaks[b], c = breaks[b + 1];
    const int panels =
        std::max(1, static_cast<int>(std::lround(panels_total * (c - a))));
    const double h = (c - a) / panels;
    for (int p = 0; p < panels; ++p)
      for (int g = 0; g < kOrder; ++g) {
        u1_nodes_.push_back(a + (p + gauss.nodes[g]) * h);
        u1_weights_.push_back(gauss.weights[g] * h);
      }
  }
  size_ = u1_nodes_.size();
  for (int d = 1; d < dim_; ++d) size_ *= static_cast<std::size_t>(n_);
}

Vec PieceAdaptedRule::node(std::size_t i) const {
  Vec u(dim_);
  for (int d = dim_ - 1; d >= 1; --d) {
    u[d] = (static_cast<double>(i % n_) + 0.5) / n_;
    i /= n_;
  }
  u[0] = u1_nodes_[i];
  return wrap_vec(to_x_ * u);
}

double PieceAdaptedRule::weight(std::size_t i) const {
  for (int d = 1; d < dim_; ++d) i /= n_;
  return u1_weights_[i] / std::pow(static_cast<double>(n_), dim_ - 1);
}

double integrate(const std::function<double(const Vec&)>& f,
                 const PieceAdaptedRule& rule) {
  return deterministic_sum(rule.size(), [&](std::size_t i) {
    const double v = f(rule.node(i)) * rule.weight(i);
    if (std::isnan(v))
      throw QuadratureError("NaN integrand at node " + std::to_string(i), i);
    return v;
  });
}

double distributional_divergence_check(const PiecewiseField& field,
                                       const TestFunction& phi, int n) {
  const PieceAdaptedRule rule(field, n);
  const double transport = integrate(
      [&](const Vec& x) { return field.value(x).dot(phi.gradient(x)); }, rule);
  const double absolutely_continuous = integrate(
      [&](const Vec& x) { return phi.value(x) * field.divergence(x); }, rule);
  CompensatedSum singular;
  for (const auto& jump : field.jumps()) {
    const double alignment = jump.jump_direction().dot(jump.normal());
    singular.add(surface_quadrature(
        jump, field.dim(),
        [&](const Vec& x) { return phi.value(x) * alignment; }, n));
  }
  return -transport - absolutely_continuous - singular.value();
}

}  // namespace rfl
