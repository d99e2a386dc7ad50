#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rfl/errors.hpp"
#include "rfl/linalg.hpp"
#include "rfl/parallel.hpp"

namespace rfl {

/// Reduces a real coordinate modulo 1 into [0, 1).
inline double wrap_coordinate(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

/// Reduces a real offset into [-1/2, 1/2). A tie at exactly 1/2 maps to -1/2.
inline double min_image_coordinate(double d) {
  double r = d - std::floor(d + 0.5);
  return r >= 0.5 ? r - 1.0 : r;
}

/// A point of the flat torus, each coordinate in [0, 1).
class TorusPoint {
 public:
  TorusPoint() = default;
  /// Wraps `raw` onto the torus; throws InvalidInput on non-finite input.
  explicit TorusPoint(const Vec& raw);

  int dim() const { return static_cast<int>(coords_.size()); }
  const Vec& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }

 private:
  Vec coords_;
};

/// The minimal periodic image of a difference of torus points; every
/// component lies in [-1/2, 1/2).
class Displacement {
 public:
  Displacement() = default;
  explicit Displacement(const Vec& raw);

  int dim() const { return static_cast<int>(components_.size()); }
  const Vec& components() const { return components_; }
  double operator[](int i) const { return components_[i]; }
  double norm() const { return components_.norm(); }

 private:
  Vec components_;
};

TorusPoint wrap(const Vec& raw);

/// d with wrap(b + d) == a and minimal |d_i|.
Displacement min_image(const TorusPoint& a, const TorusPoint& b);

// Unchecked fast paths used inside quadrature loops.
inline Vec wrap_vec(const Vec& raw) {
  Vec r(raw.size());
  for (int i = 0; i < raw.size(); ++i) r[i] = wrap_coordinate(raw[i]);
  return r;
}
inline Vec min_image_vec(const Vec& d) {
  Vec r(d.size());
  for (int i = 0; i < d.size(); ++i) r[i] = min_image_coordinate(d[i]);
  return r;
}
inline double torus_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double d = min_image_coordinate(a[i] - b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

/// Uniform cell-centred tensor grid. Nodes are generated on demand from the
/// flat index; all weights are equal and sum to the measure of the domain.
///
/// A grid either covers the torus [0,1)^N, or an axis box, or a box
/// expressed in an orthonormal frame (used to resolve thin kernel supports).
class QuadratureGrid {
 public:
  static QuadratureGrid torus(int dim, int n);
  static QuadratureGrid torus(const IVec& counts);
  static QuadratureGrid box(const Vec& lower, const Vec& upper, int n);
  /// Box centred at the origin with the given half widths along the columns
  /// of `frame` (orthonormal).
  static QuadratureGrid oriented_box(const Mat& frame, const Vec& half_widths,
                                     int n);

  int dim() const { return static_cast<int>(counts_.size()); }
  const IVec& counts() const { return counts_; }
  int points_per_dim() const { return counts_[0]; }
  std::size_t size() const { return size_; }
  double weight() const { return weight_; }
  double measure() const { return weight_ * static_cast<double>(size_); }
  bool periodic() const { return periodic_; }

  Vec node(std::size_t index) const {
    Vec local(dim());
    for (int d = dim() - 1; d >= 0; --d) {
      const int i = static_cast<int>(index % counts_[d]);
      index /= counts_[d];
      local[d] = lower_[d] + (i + 0.5) * spacing_[d];
    }
    if (!rotated_) return local;
    return frame_ * local;
  }

  /// Index-space coordinate of node `index` along axis d.
  int index_along(std::size_t index, int d) const {
    for (int k = dim() - 1; k > d; --k) index /= counts_[k];
    return static_cast<int>(index % counts_[d]);
  }

 private:
  QuadratureGrid() = default;
  IVec counts_;
  Vec lower_;
  Vec spacing_;
  Mat frame_;
  bool rotated_ = false;
  bool periodic_ = false;
  std::size_t size_ = 0;
  double weight_ = 0.0;
};

/// Gauss-Legendre rule with n nodes mapped to [0, 1]; weights sum to 1.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Weighted sum of f over the grid nodes, reduced in a fixed order. A NaN
/// value raises QuadratureError naming the node.
template <class F>
double integrate(F&& f, const QuadratureGrid& grid) {
  const double total = deterministic_sum(grid.size(), [&](std::size_t i) {
    const double v = f(grid.node(i));
    if (std::isnan(v))
      throw QuadratureError("NaN integrand at node " + std::to_string(i), i);
    return v;
  });
  return total * grid.weight();
}

}  // namespace rfl
