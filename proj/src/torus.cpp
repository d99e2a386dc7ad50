#include "rfl/torus.hpp"

#include <cstdlib>

namespace rfl {

namespace {

int initial_thread_count() {
  if (const char* env = std::getenv("RFL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{initial_thread_count()};
  return n;
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim)
    throw InvalidInput("dimension must be in [1, " + std::to_string(kMaxDim) +
                       "], got " + std::to_string(dim));
}

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int n) { thread_setting().store(n > 0 ? n : 1); }

TorusPoint::TorusPoint(const Vec& raw) {
  check_dim(static_cast<int>(raw.size()));
  for (int i = 0; i < raw.size(); ++i)
    if (!std::isfinite(raw[i]))
      throw InvalidInput("non-finite coordinate " + std::to_string(i));
  coords_ = wrap_vec(raw);
}

Displacement::Displacement(const Vec& raw) {
  check_dim(static_cast<int>(raw.size()));
  for (int i = 0; i < raw.size(); ++i)
    if (!std::isfinite(raw[i]))
      throw InvalidInput("non-finite displacement component " +
                         std::to_string(i));
  components_ = min_image_vec(raw);
}

TorusPoint wrap(const Vec& raw) { return TorusPoint(raw); }

Displacement min_image(const TorusPoint& a, const TorusPoint& b) {
  if (a.dim() != b.dim()) throw InvalidInput("dimension mismatch");
  return Displacement(a.coords() - b.coords());
}

QuadratureGrid QuadratureGrid::torus(int dim, int n) {
  check_dim(dim);
  return torus(IVec::Constant(dim, n));
}

QuadratureGrid QuadratureGrid::torus(const IVec& counts) {
  const int dim = static_cast<int>(counts.size());
  check_dim(dim);
  QuadratureGrid g;
  g.counts_ = counts;
  g.lower_ = Vec::Zero(dim);
  g.spacing_ = Vec(dim);
  g.size_ = 1;
  for (int d = 0; d < dim; ++d) {
    if (counts[d] < 1) throw InvalidInput("grid needs at least one point");
    g.spacing_[d] = 1.0 / counts[d];
    g.size_ *= static_cast<std::size_t>(counts[d]);
  }
  g.periodic_ = true;
  g.weight_ = 1.0 / static_cast<double>(g.size_);
  return g;
}

QuadratureGrid QuadratureGrid::box(const Vec& lower, const Vec& upper, int n) {
  const int dim = static_cast<int>(lower.size());
  check_dim(dim);
  if (upper.size() != lower.size()) throw InvalidInput("box corner mismatch");
  if (n < 1) throw InvalidInput("grid needs at least one point");
  QuadratureGrid g;
  g.counts_ = IVec::Constant(dim, n);
  g.lower_ = lower;
  g.spacing_ = (upper - lower) / n;
  g.size_ = 1;
  double volume = 1.0;
  for (int d = 0; d < dim; ++d) {
    if (!(upper[d] > lower[d])) throw InvalidInput("empty box");
    g.size_ *= static_cast<std::size_t>(n);
    volume *= upper[d] - lower[d];
  }
  g.weight_ = volume / static_cast<double>(g.size_);
  return g;
}

QuadratureGrid QuadratureGrid::oriented_box(const Mat& frame,
                                            const Vec& half_widths, int n) {
  QuadratureGrid g = box(-half_widths, half_widths, n);
  g.frame_ = frame;
  g.rotated_ = true;
  return g;
}

}  // namespace rfl

namespace rfl {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("Gauss-Legendre rule needs n >= 1");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace rfl
