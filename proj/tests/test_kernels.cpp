#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/LU>
#include <random>

#include "rfl/fields.hpp"
#include "rfl/kernels.hpp"

using namespace rfl;

namespace {

Vec random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = g(rng);
  return v / v.norm();
}

Vec random_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = u(rng);
  return v;
}

double kernel_mass(const AnisotropicKernel& k, const Vec& x, int n) {
  const LocalKernel local = k.at(x);
  return integrate([&](const Vec& z) { return local.rho(z); },
                   local.z_grid(n));
}

}  // namespace

TEST_CASE("reference normalization matches the closed form for poly_bump") {
  // int (1-|z|^2)^4 dz = pi^{N/2} Gamma(5) / Gamma(N/2 + 5)
  for (int dim : {1, 2, 3}) {
    const double exact = std::pow(kPi, dim / 2.0) * 24.0 /
                         std::tgamma(dim / 2.0 + 5.0);
    CHECK(radial_shape_integral(ProfileKind::poly_bump, dim) ==
          doctest::Approx(exact).epsilon(1e-13));
  }
}

TEST_CASE("dilation matrix, inverse and determinant") {
  const BumpProfile profile(ProfileKind::smooth_exp, 2);
  Vec e(2);
  e << 1.0, 0.0;
  const Vec x = Vec::Zero(2);
  AnisotropicKernel k0(profile, DirectionField::constant(e), 0.0);
  CHECK(k0.U(x).isIdentity(0.0));
  CHECK(k0.det_U() == 1.0);
  AnisotropicKernel k3(profile, DirectionField::constant(e), 3.0);
  Mat expected(2, 2);
  expected << 4.0, 0.0, 0.0, 1.0;
  CHECK(k3.U(x) == expected);
  CHECK(k3.det_U() == 4.0);

  std::mt19937_64 rng(3);
  for (int dim : {2, 3})
    for (double gamma : {0.5, 10.0, 1000.0})
      for (int i = 0; i < 20; ++i) {
        AnisotropicKernel k(BumpProfile(ProfileKind::poly_bump, dim),
                            DirectionField::constant(random_unit(rng, dim)),
                            gamma);
        const Vec y = random_point(rng, dim);
        const Mat prod = k.U(y) * k.U_inv(y);
        CHECK((prod - Mat::Identity(dim, dim)).norm() < 1e-14 * (1 + gamma));
        CHECK(k.U(y).determinant() ==
              doctest::Approx(k.det_U()).epsilon(1e-12));
      }
}

TEST_CASE("rho vanishes outside the ellipsoid and peaks at the origin") {
  std::mt19937_64 rng(5);
  const BumpProfile profile(ProfileKind::smooth_exp, 2);
  AnisotropicKernel k(profile, DirectionField::constant(random_unit(rng, 2)),
                      4.0);
  const Vec x = random_point(rng, 2);
  for (int i = 0; i < 200; ++i) {
    const Vec z = 1.5 * random_unit(rng, 2) *
                  std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double s = (k.U(x) * z).squaredNorm();
    if (s >= 1.0) CHECK(k.rho(x, z) == 0.0);
    else CHECK(k.rho(x, z) > 0.0);
  }
  AnisotropicKernel radial(profile, DirectionField::constant(random_unit(rng, 2)),
                           0.0);
  CHECK(radial.rho(x, Vec::Zero(2)) ==
        doctest::Approx(profile.normalization() * std::exp(-1.0)));
}

TEST_CASE("kernel mass is one for every x, gamma, eta and profile") {
  std::mt19937_64 rng(17);
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {0.0, 1.0, 10.0, 100.0})
      for (int i = 0; i < 20; ++i) {
        const BumpProfile profile(kind, 2);
        AnisotropicKernel k(
            profile,
            DirectionField::mollified_normal(random_unit(rng, 2), 0.3, 0.1),
            gamma);
        CHECK(std::abs(kernel_mass(k, random_point(rng, 2), 256) - 1.0) <=
              1e-6);
      }
  for (double gamma : {0.0, 10.0}) {
    AnisotropicKernel k(BumpProfile(ProfileKind::smooth_exp, 3),
                        DirectionField::constant(random_unit(rng, 3)), gamma);
    CHECK(std::abs(kernel_mass(k, random_point(rng, 3), 64) - 1.0) <= 1e-6);
  }
}

TEST_CASE("change of variables: axis-aligned grids agree with the formula") {
  // Integrate on a fixed axis box, independent of eta: int g(Uz) det U dz
  // equals int g(w) dw for g = F0(|w|^2) and g = F0(|w|^2) |w|^2.
  const BumpProfile profile(ProfileKind::smooth_exp, 2);
  Vec e(2);
  e << std::cos(0.4), std::sin(0.4);
  Vec lo(2), hi(2);
  lo << -1.0, -1.0;
  hi << 1.0, 1.0;
  const auto box = QuadratureGrid::box(lo, hi, 2048);
  const double moment = radial_moment(profile, [](double r) { return r * r; });
  for (double gamma : {1.0, 10.0}) {
    AnisotropicKernel k(profile, DirectionField::constant(e), gamma);
    const Mat u = k.U(Vec::Zero(2));
    const double mass = integrate(
        [&](const Vec& z) { return k.rho(Vec::Zero(2), z); }, box);
    const double second = integrate(
        [&](const Vec& z) {
          const Vec w = u * z;
          return profile.value(w.squaredNorm()) * w.squaredNorm() * k.det_U();
        },
        box);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(second == doctest::Approx(moment).epsilon(1e-4));
  }
}

TEST_CASE("d2_rho matches finite differences in z") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (int dim : {2, 3})
      for (int i = 0; i < 50; ++i) {
        const double gamma = 10.0 * u(rng);
        AnisotropicKernel k(BumpProfile(kind, dim),
                            DirectionField::constant(random_unit(rng, dim)),
                            gamma);
        const Vec x = random_point(rng, dim);
        Vec z = random_unit(rng, dim) * 0.9 * u(rng);
        z = k.U_inv(x) * z;  // keep |Uz| < 0.9
        const Vec exact = k.d2_rho(x, z);
        const double h = 1e-5;
        Vec fd(dim);
        for (int j = 0; j < dim; ++j) {
          const Vec e = h * unit_vector(dim, j);
          fd[j] = (k.rho(x, z + e) - k.rho(x, z - e)) / (2 * h);
        }
        CHECK((fd - exact).norm() <= 1e-6 * std::max(1.0, exact.norm()));
      }
}

TEST_CASE("d2_rho special cases") {
  std::mt19937_64 rng(29);
  const BumpProfile profile(ProfileKind::smooth_exp, 2);
  AnisotropicKernel k(profile, DirectionField::constant(random_unit(rng, 2)),
                      5.0);
  CHECK(k.d2_rho(Vec::Zero(2), Vec::Zero(2)).isZero(0.0));
  AnisotropicKernel radial(profile,
                           DirectionField::constant(random_unit(rng, 2)), 0.0);
  for (int i = 0; i < 20; ++i) {
    const Vec z = 0.8 * random_unit(rng, 2) * 0.5;
    const Vec g = radial.d2_rho(Vec::Zero(2), z);
    CHECK(std::abs(g[0] * z[1] - g[1] * z[0]) < 1e-12 * g.norm());
    CHECK(g.dot(z) < 0.0);
  }
}

TEST_CASE("d1_rho vanishes for constant eta") {
  std::mt19937_64 rng(31);
  AnisotropicKernel k(BumpProfile(ProfileKind::smooth_exp, 2),
                      DirectionField::constant(random_unit(rng, 2)), 7.0);
  for (int i = 0; i < 20; ++i)
    CHECK(k.d1_rho(random_point(rng, 2), 0.3 * random_unit(rng, 2))
              .isZero(0.0));
}

TEST_CASE("d1_rho matches finite differences in x for a mollified normal") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& field = catalog("D");
  const Vec normal = field.jumps().front().normal();
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (int i = 0; i < 50; ++i) {
      AnisotropicKernel k(BumpProfile(kind, 2),
                          DirectionField::mollified_normal(normal, 0.2, 0.05),
                          1.0 + 20.0 * u(rng));
      const Vec x = random_point(rng, 2);
      Vec z = k.U_inv(x) * (random_unit(rng, 2) * 0.9 * u(rng));
      const Vec exact = k.d1_rho(x, z);
      const double h = 1e-6;
      Vec fd(2);
      for (int j = 0; j < 2; ++j) {
        const Vec e = h * unit_vector(2, j);
        fd[j] = (k.rho(x + e, z) - k.rho(x - e, z)) / (2 * h);
      }
      CHECK((fd - exact).norm() <= 1e-5 * std::max(1.0, exact.norm()));
    }
}

TEST_CASE("d1_rho integrates to zero over z") {
  std::mt19937_64 rng(41);
  for (auto kind : {ProfileKind::smooth_exp, ProfileKind::poly_bump})
    for (double gamma : {1.0, 10.0, 100.0})
      for (int i = 0; i < 5; ++i) {
        AnisotropicKernel k(
            BumpProfile(kind, 2),
            DirectionField::mollified_normal(random_unit(rng, 2), 0.4, 0.2),
            gamma);
        const Vec x = random_point(rng, 2);
        const LocalKernel local = k.at(x);
        for (int j = 0; j < 2; ++j) {
          const double v = integrate(
              [&](const Vec& z) { return local.d1_rho(z)[j]; },
              local.z_grid(256));
          CHECK(std::abs(v) <= 1e-6);
        }
      }
}

TEST_CASE("support bounds") {
  std::mt19937_64 rng(43);
  const BumpProfile profile(ProfileKind::poly_bump, 2);
  for (double gamma : {0.0, 9.0, 40.0}) {
    AnisotropicKernel k(profile,
                        DirectionField::mollified_normal(random_unit(rng, 2),
                                                         0.3),
                        gamma);
    const auto [inner, outer] = k.support_bounds();
    CHECK(inner == doctest::Approx(1.0 / (1.0 + gamma)));
    CHECK(outer == 1.0);
    const double delta = 1e-3 * inner;
    const Vec x = random_point(rng, 2);
    const Vec eta = k.eta().eval(x);
    for (int i = 0; i < 100; ++i) {
      const Vec dir = random_unit(rng, 2);
      CHECK(k.rho(x, 1.001 * dir) == 0.0);
      CHECK(k.rho(x, (outer + delta) * dir) == 0.0);
      CHECK(k.rho(x, (inner - delta) * dir) > 0.0);
    }
    // Both radii are attained: along eta the support ends at `inner`,
    // across eta it reaches `outer`.
    Vec across(2);
    across << -eta[1], eta[0];
    CHECK(k.rho(x, (outer - delta) * across) > 0.0);
    if (gamma > 0.0) CHECK(k.rho(x, (inner + delta) * eta) == 0.0);
  }
  AnisotropicKernel k0(profile, DirectionField::constant(random_unit(rng, 2)),
                       0.0);
  CHECK(k0.support_bounds().first == 1.0);
  AnisotropicKernel k9(profile, DirectionField::constant(random_unit(rng, 2)),
                       9.0);
  CHECK(k9.support_bounds().first == doctest::Approx(0.1));
}

TEST_CASE("scalar-product bounds hold on jump nodes") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int samples = 0;
  for (const char* id : {"C", "D"}) {
    const auto& field = catalog(id);
    for (const auto& jump : field.jumps()) {
      const auto nodes = surface_nodes(jump, 2, 16);
      for (int i = 0; i < 500; ++i) {
        const auto& node = nodes[i % nodes.size()];
        const double gamma = std::pow(10.0, 3.0 * u(rng));
        const double delta = 0.5 * u(rng);
        const Vec eta_b = jump.normal();
        const Vec xi_b = jump.jump_direction();
        AnisotropicKernel k(BumpProfile(ProfileKind::poly_bump, 2),
                            DirectionField::constant(rotate12(eta_b, delta)),
                            gamma);
        const Vec z = random_unit(rng, 2) * u(rng);
        const Vec eta = k.eta().eval(node.point);
        const double mis = (eta - eta_b).norm();
        const double lhs1 = std::abs(z.dot(k.U(node.point) * xi_b));
        const double lhs2 = std::abs(eta_b.dot(k.U_inv(node.point) * z));
        CHECK(lhs1 <= (1.0 + gamma * mis) * z.norm() * (1 + 1e-12) + 1e-15);
        CHECK(lhs2 <= (mis + 1.0 / (1.0 + gamma)) * z.norm() * (1 + 1e-12) +
                          1e-15);
        ++samples;
      }
    }
  }
  CHECK(samples == 2000);
}
