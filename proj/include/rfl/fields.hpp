#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "rfl/torus.hpp"

namespace rfl {

enum class FieldClass { smooth, sobolev_W11, bv, pathological };

std::string to_string(FieldClass c);

/// Level-set tolerance for deciding that a point sits on a jump surface.
inline constexpr double kJumpTolerance = 1e-12;

/// One flat jump family {x : <x, k> = c mod 1} for an integer wavevector k,
/// with constant one-sided traces of the field.
struct JumpComponent {
  IVec wavevector;
  double offset = 0.0;
  Vec minus_trace;  // trace on the side opposite to the normal
  Vec plus_trace;   // trace on the side the normal points into

  /// eta_b = k / |k|.
  Vec normal() const;
  /// sigma = |b+ - b-|.
  double density() const { return (plus_trace - minus_trace).norm(); }
  /// xi_b = (b+ - b-) / sigma.
  Vec jump_direction() const;
  /// Signed level-set value in [-1/2, 1/2); zero on the surface.
  double level(const Vec& x) const;
  /// Total (N-1)-dimensional measure of the surface on the torus, |k|.
  double area() const;
};

struct JumpData {
  Vec xi;
  Vec eta;
  double sigma = 0.0;
};

/// A smooth formula active on one region of the torus.
struct FieldPiece {
  std::string name;
  std::function<bool(const Vec&)> contains;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;
};

/// A smooth test function and its gradient.
struct TestFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

/// A node of a surface quadrature.
struct SurfaceNode {
  Vec point;
  double weight = 0.0;
};

/// An immutable catalog field with a known decomposition
/// Db = grad_a b dx + xi_b (x) eta_b |D^s b|.
class PiecewiseField {
 public:
  PiecewiseField(std::string id, int dim, FieldClass classification,
                 std::string description, std::vector<FieldPiece> pieces,
                 std::vector<JumpComponent> jumps);

  const std::string& id() const { return id_; }
  int dim() const { return dim_; }
  FieldClass classification() const { return class_; }
  const std::string& description() const { return description_; }
  const std::vector<FieldPiece>& pieces() const { return pieces_; }
  const std::vector<JumpComponent>& jumps() const { return jumps_; }
  bool has_jumps() const { return !jumps_.empty(); }
  /// True when every piece is a constant vector.
  bool piecewise_constant() const { return piecewise_constant_; }

  /// Value of the active piece. Throws OnJumpError within kJumpTolerance of
  /// a jump surface.
  Vec eval_b(const TorusPoint& x) const;
  Mat grad_a(const TorusPoint& x) const;
  double div_a(const TorusPoint& x) const;
  /// (xi_b, eta_b, sigma) of the jump component through x; NoJumpError when
  /// x is on no jump surface.
  JumpData jump_data(const TorusPoint& x) const;

  /// Index of the component whose surface passes through x, or -1.
  int jump_at(const Vec& x, double tol = kJumpTolerance) const;
  /// Index of the piece containing x (no jump check).
  int locate(const Vec& x) const;

  // Unchecked a.e. evaluation used inside quadratures; x must already be on
  // the torus.
  Vec value(const Vec& x) const { return pieces_[locate(x)].value(x); }
  Mat jacobian(const Vec& x) const { return pieces_[locate(x)].jacobian(x); }
  double divergence(const Vec& x) const { return jacobian(x).trace(); }

  /// sup |div^a b| over the torus (closed form for the catalog).
  double div_sup() const { return div_sup_; }
  /// |D^s b|(T^N) = sum of sigma * area over the jump components.
  double singular_mass() const;

 private:
  friend PiecewiseField make_field(std::string_view id, int dim);
  std::string id_;
  int dim_;
  FieldClass class_;
  std::string description_;
  std::vector<FieldPiece> pieces_;
  std::vector<JumpComponent> jumps_;
  double div_sup_ = 0.0;
  bool piecewise_constant_ = false;
};

/// Catalog ids in listing order.
const std::vector<std::string>& catalog_ids();
bool in_catalog(std::string_view id);
/// Builds catalog field `id` on the N-torus (the catalog acts on the first
/// two coordinates; remaining coordinates are passive). Throws InvalidInput
/// for unknown ids or dim < 2.
PiecewiseField make_field(std::string_view id, int dim = 2);
/// Cached catalog instance.
const PiecewiseField& catalog(std::string_view id, int dim = 2);

/// Quadrature nodes on one jump surface with n points per tangential
/// direction; weights sum to the surface area.
std::vector<SurfaceNode> surface_nodes(const JumpComponent& jump, int dim,
                                       int n);

/// Sum over all jump components of the integral of g * sigma against the
/// surface measure.
double surface_quadrature(const PiecewiseField& field,
                          const std::function<double(const Vec&)>& g, int n);
/// Same, restricted to a single component.
double surface_quadrature(const JumpComponent& jump, int dim,
                          const std::function<double(const Vec&)>& g, int n);

/// Volume rule adapted to the jump geometry: in coordinates where the jump
/// wavevector is the first axis, panels of Gauss-Legendre nodes break at the
/// jump offsets. Smooth fields get the plain uniform torus grid.
class PieceAdaptedRule {
 public:
  PieceAdaptedRule(const PiecewiseField& field, int n);
  std::size_t size() const { return size_; }
  Vec node(std::size_t i) const;
  double weight(std::size_t i) const;

 private:
  int dim_;
  int n_;
  std::vector<double> u1_nodes_;
  std::vector<double> u1_weights_;
  Mat to_x_;  // x = to_x_ * u (integer, unimodular)
  std::size_t size_;
};

double integrate(const std::function<double(const Vec&)>& f,
                 const PieceAdaptedRule& rule);

/// -int b.grad(phi) - int phi div^a b - int_Sigma phi <xi_b, eta_b> sigma dH.
double distributional_divergence_check(const PiecewiseField& field,
                                       const TestFunction& phi, int n);

}  // namespace rfl
