#pragma once

#include <optional>
#include <string>
#include <utility>

#include "rfl/torus.hpp"

namespace rfl {

enum class ProfileKind { smooth_exp, poly_bump };

std::string to_string(ProfileKind k);
ProfileKind parse_profile(const std::string& s);

/// Radial bump F0(s) = c_N f(s), s = |z|^2, supported in s < 1.
///   smooth_exp: f(s) = exp(-1/(1-s))
///   poly_bump:  f(s) = (1-s)^4
/// c_N makes the integral of F0(|z|^2) over R^N equal to one; it comes from
/// a 1-D radial reference quadrature and is cached per (kind, N).
class BumpProfile {
 public:
  BumpProfile(ProfileKind kind, int dim);
  /// Same profile with an explicit constant, bypassing the reference value.
  BumpProfile(ProfileKind kind, int dim, double normalization);

  ProfileKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double normalization() const { return c_; }

  double value(double s) const {
    if (s >= 1.0) return 0.0;
    return c_ * shape(s);
  }
  double derivative(double s) const {
    if (s >= 1.0) return 0.0;
    return c_ * shape_derivative(s);
  }

  double shape(double s) const {
    const double r = 1.0 - s;
    if (kind_ == ProfileKind::smooth_exp) return std::exp(-1.0 / r);
    const double r2 = r * r;
    return r2 * r2;
  }
  double shape_derivative(double s) const {
    const double r = 1.0 - s;
    if (kind_ == ProfileKind::smooth_exp) return -std::exp(-1.0 / r) / (r * r);
    return -4.0 * r * r * r;
  }

 private:
  ProfileKind kind_;
  int dim_;
  double c_;
};

/// Integral of f(|z|^2) over R^N by radial Gauss-Legendre quadrature.
double radial_shape_integral(ProfileKind kind, int dim);
/// Integral of g(|z|) F0(|z|^2) over R^N for a radial weight g.
double radial_moment(const BumpProfile& profile, double (*g)(double));
/// K0 = integral of 2 |F0'(|w|^2)| |w|^2 over R^N.
double derivative_moment(const BumpProfile& profile);

/// Smooth unit direction field used to orient the kernel.
///   constant:         eta(x) = v
///   mollified_normal: eta(x) = R(tilt + width sin 2 pi x2) n0, a rotation in
///                     the (e1, e2) plane of the base normal n0.
class DirectionField {
 public:
  enum class Kind { constant, mollified_normal };

  static DirectionField constant(const Vec& v);
  static DirectionField mollified_normal(const Vec& base_normal, double width,
                                         double tilt = 0.0);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(base_.size()); }
  const Vec& base() const { return base_; }
  double width() const { return width_; }
  double tilt() const { return tilt_; }

  Vec eval(const Vec& x) const;
  /// D(eta)(x), entry (i, j) = d eta_i / d x_j.
  Mat jacobian(const Vec& x) const;

 private:
  DirectionField() = default;
  Kind kind_ = Kind::constant;
  Vec base_;
  double width_ = 0.0;
  double tilt_ = 0.0;
};

/// The kernel frozen at one base point x: eta, D(eta) and U are precomputed.
class LocalKernel {
 public:
  LocalKernel(const BumpProfile& profile, double gamma, Vec eta, Mat deta);

  const Vec& eta() const { return eta_; }
  double gamma() const { return gamma_; }
  double det_u() const { return 1.0 + gamma_; }

  /// U z = z + gamma <eta, z> eta.
  Vec apply_u(const Vec& z) const { return z + gamma_ * eta_.dot(z) * eta_; }

  double rho(const Vec& z) const {
    const double s = apply_u(z).squaredNorm();
    return profile_->value(s) * det_u();
  }
  /// Gradient of rho in z: 2 F0'(|Uz|^2) U (U z) det U.
  Vec d2_rho(const Vec& z) const {
    const Vec uz = apply_u(z);
    const double s = uz.squaredNorm();
    if (s >= 1.0) return Vec::Zero(z.size());
    return 2.0 * profile_->derivative(s) * det_u() * apply_u(uz);
  }
  /// Gradient of rho in the base point x (chain rule through U(x)).
  Vec d1_rho(const Vec& z) const;

  /// Orthonormal frame whose first column is eta.
  Mat frame() const;
  /// Cell-centred grid on the box enclosing the support ellipsoid, aligned
  /// with eta; n points per axis.
  QuadratureGrid z_grid(int n) const;

 private:
  const BumpProfile* profile_;
  double gamma_;
  Vec eta_;
  Mat deta_;
};

/// rho(x, z) = F0(|U(x) z|^2) det U(x), U(x) = Id + gamma eta(x) eta(x)^T.
class AnisotropicKernel {
 public:
  AnisotropicKernel(BumpProfile profile, DirectionField eta, double gamma);

  const BumpProfile& profile() const { return profile_; }
  const DirectionField& eta() const { return eta_; }
  double gamma() const { return gamma_; }
  int dim() const { return profile_.dim(); }

  LocalKernel at(const Vec& x) const {
    return LocalKernel(profile_, gamma_, eta_.eval(x), eta_.jacobian(x));
  }

  Mat U(const Vec& x) const;
  Mat U_inv(const Vec& x) const;
  double det_U() const { return 1.0 + gamma_; }

  double rho(const Vec& x, const Vec& z) const { return at(x).rho(z); }
  Vec d1_rho(const Vec& x, const Vec& z) const { return at(x).d1_rho(z); }
  Vec d2_rho(const Vec& x, const Vec& z) const { return at(x).d2_rho(z); }

  /// (inner, outer) radii with B(0, inner) in supp rho(x, .) in B(0, outer).
  std::pair<double, double> support_bounds() const {
    return {1.0 / (1.0 + gamma_), 1.0};
  }

 private:
  BumpProfile profile_;
  DirectionField eta_;
  double gamma_;
};

}  // namespace rfl
