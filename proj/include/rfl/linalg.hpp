#pragma once

#include <Eigen/Core>

namespace rfl {

// Dimensions are chosen at run time but never exceed kMaxDim, so small
// vectors and matrices live on the stack.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim,
                          kMaxDim>;
using IVec = Eigen::Matrix<int, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline Vec unit_vector(int dim, int axis) {
  Vec v = Vec::Zero(dim);
  v[axis] = 1.0;
  return v;
}

// Rotation by `angle` in the (e1, e2) plane; other axes are left alone.
inline Vec rotate12(const Vec& v, double angle) {
  Vec r = v;
  const double c = std::cos(angle), s = std::sin(angle);
  r[0] = c * v[0] - s * v[1];
  r[1] = s * v[0] + c * v[1];
  return r;
}

}  // namespace rfl
