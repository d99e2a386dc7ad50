#include "rfl/kernels.hpp"

#include <map>
#include <mutex>

namespace rfl {

std::string to_string(ProfileKind k) {
  return k == ProfileKind::smooth_exp ? "smooth_exp" : "poly_bump";
}

ProfileKind parse_profile(const std::string& s) {
  if (s == "smooth_exp") return ProfileKind::smooth_exp;
  if (s == "poly_bump") return ProfileKind::poly_bump;
  throw InvalidInput("unknown profile '" + s + "'");
}

namespace {

double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return kTwoPi;
    case 3: return 4.0 * kPi;
    default: throw InvalidInput("unsupported dimension");
  }
}

// Composite Gauss-Legendre over r in [0, 1].
template <class F>
double radial_integral(F&& f) {
  constexpr int kPanels = 4000;
  static const GaussRule rule = gauss_legendre(8);
  CompensatedSum sum;
  const double h = 1.0 / kPanels;
  for (int p = 0; p < kPanels; ++p)
    for (std::size_t g = 0; g < rule.nodes.size(); ++g)
      sum.add(rule.weights[g] * h * f((p + rule.nodes[g]) * h));
  return sum.value();
}

}  // namespace

double radial_shape_integral(ProfileKind kind, int dim) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, double> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_pair(static_cast<int>(kind), dim);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const BumpProfile unit(kind, dim, 1.0);
  const double v = sphere_area(dim) * radial_integral([&](double r) {
                     return unit.shape(r * r) * std::pow(r, dim - 1);
                   });
  cache.emplace(key, v);
  return v;
}

double radial_moment(const BumpProfile& profile, double (*g)(double)) {
  const int dim = profile.dim();
  return sphere_area(dim) * radial_integral([&](double r) {
           return g(r) * profile.value(r * r) * std::pow(r, dim - 1);
         });
}

double derivative_moment(const BumpProfile& profile) {
  const int dim = profile.dim();
  return sphere_area(dim) * radial_integral([&](double r) {
           return 2.0 * std::abs(profile.derivative(r * r)) * r * r *
                  std::pow(r, dim - 1);
         });
}

BumpProfile::BumpProfile(ProfileKind kind, int dim)
    : kind_(kind), dim_(dim), c_(1.0) {
  if (dim < 1 || dim > kMaxDim) throw InvalidInput("unsupported dimension");
  c_ = 1.0 / radial_shape_integral(kind, dim);
}

BumpProfile::BumpProfile(ProfileKind kind, int dim, double normalization)
    : kind_(kind), dim_(dim), c_(normalization) {
  if (dim < 1 || dim > kMaxDim) throw InvalidInput("unsupported dimension");
}

DirectionField DirectionField::constant(const Vec& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw InvalidInput("direction must be a nonzero finite vector");
  DirectionField f;
  f.kind_ = Kind::constant;
  f.base_ = v / n;
  return f;
}

DirectionField DirectionField::mollified_normal(const Vec& base_normal,
                                                double width, double tilt) {
  DirectionField f = constant(base_normal);
  if (f.dim() < 2) throw InvalidInput("mollified normal needs dim >= 2");
  f.kind_ = Kind::mollified_normal;
  f.width_ = width;
  f.tilt_ = tilt;
  return f;
}

Vec DirectionField::eval(const Vec& x) const {
  if (kind_ == Kind::constant) return base_;
  return rotate12(base_, tilt_ + width_ * std::sin(kTwoPi * x[1]));
}

Mat DirectionField::jacobian(const Vec& x) const {
  const int n = dim();
  Mat m = Mat::Zero(n, n);
  if (kind_ == Kind::constant) return m;
  const double angle = tilt_ + width_ * std::sin(kTwoPi * x[1]);
  const double dangle = width_ * kTwoPi * std::cos(kTwoPi * x[1]);
  const double c = std::cos(angle), s = std::sin(angle);
  m(0, 1) = (-s * base_[0] - c * base_[1]) * dangle;
  m(1, 1) = (c * base_[0] - s * base_[1]) * dangle;
  return m;
}

LocalKernel::LocalKernel(const BumpProfile& profile, double gamma, Vec eta,
                         Mat deta)
    : profile_(&profile), gamma_(gamma), eta_(std::move(eta)),
      deta_(std::move(deta)) {}

Vec LocalKernel::d1_rho(const Vec& z) const {
  const int n = static_cast<int>(z.size());
  if (gamma_ == 0.0 || deta_.isZero(0.0)) return Vec::Zero(n);
  const Vec uz = apply_u(z);
  const double s = uz.squaredNorm();
  if (s >= 1.0) return Vec::Zero(n);
  // d(Uz)/dx_j = gamma [ (d_j eta . z) eta + <eta, z> d_j eta ]
  const double q = eta_.dot(z);
  const double a = uz.dot(eta_);
  const Vec grad_s =
      2.0 * gamma_ * (a * (deta_.transpose() * z) + q * (deta_.transpose() * uz));
  return profile_->derivative(s) * det_u() * grad_s;
}

Mat LocalKernel::frame() const {
  const int n = static_cast<int>(eta_.size());
  Mat f(n, n);
  f.col(0) = eta_;
  int filled = 1;
  for (int axis = 0; axis < n && filled < n; ++axis) {
    Vec v = unit_vector(n, axis);
    for (int c = 0; c < filled; ++c) v -= v.dot(f.col(c)) * f.col(c);
    if (v.norm() > 1e-6) f.col(filled++) = v / v.norm();
  }
  return f;
}

QuadratureGrid LocalKernel::z_grid(int n) const {
  Vec half = Vec::Ones(eta_.size());
  half[0] = 1.0 / (1.0 + gamma_);
  return QuadratureGrid::oriented_box(frame(), half, n);
}

AnisotropicKernel::AnisotropicKernel(BumpProfile profile, DirectionField eta,
                                     double gamma)
    : profile_(std::move(profile)), eta_(std::move(eta)), gamma_(gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw InvalidInput("gamma must be finite and nonnegative");
  if (eta_.dim() != profile_.dim())
    throw InvalidInput("direction field and profile dimensions differ");
}

Mat AnisotropicKernel::U(const Vec& x) const {
  const Vec e = eta_.eval(x);
  return Mat::Identity(dim(), dim()) + gamma_ * e * e.transpose();
}

Mat AnisotropicKernel::U_inv(const Vec& x) const {
  const Vec e = eta_.eval(x);
  return Mat::Identity(dim(), dim()) -
         (gamma_ / (1.0 + gamma_)) * e * e.transpose();
}

}  // namespace rfl
