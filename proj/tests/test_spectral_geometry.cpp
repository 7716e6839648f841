#include "qflow/spectral_geometry.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace testing;

TEST_CASE("gauss-legendre matches the three-point rule") {
  auto [x, w] = gauss_legendre<double>(3);
  const double r = std::sqrt(0.6);
  CHECK(x(0) == doctest::Approx(-r).epsilon(1e-15));
  CHECK(x(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(x(2) == doctest::Approx(r).epsilon(1e-15));
  CHECK(w(0) == doctest::Approx(5.0 / 9).epsilon(1e-15));
  CHECK(w(1) == doctest::Approx(8.0 / 9).epsilon(1e-15));
}

TEST_CASE("gauss-legendre integrates polynomials of degree 2n-1 exactly") {
  for (int n : {2, 5, 9, 17}) {
    auto [x, w] = gauss_legendre<double>(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      const double exact = d % 2 ? 0.0 : 2.0 / (d + 1);
      CHECK((w.array() * x.array().pow(d)).sum() == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("factor weights sum to the factor volume") {
  for (double a : {1.0, 2.5}) {
    const auto s = FactorGrid<double>::sphere(8, a);
    CHECK(std::abs(s.weights().sum() - 4 * oracle::pi * a * a) <= 1e-12 * 4 * oracle::pi * a * a);
  }
  for (double side : {two_pi, 3.0}) {
    const auto t = FactorGrid<double>::torus(4, side);
    CHECK(std::abs(t.weights().sum() - side * side) <= 1e-12 * side * side);
  }
}

TEST_CASE("eigenvalues are sorted with a single zero") {
  for (const auto& f : {FactorGrid<double>::sphere(8, 1.0), FactorGrid<double>::torus(4, two_pi)}) {
    const auto& ev = f.eigenvalues();
    for (Eigen::Index i = 1; i < ev.size(); ++i) CHECK(ev(i) >= ev(i - 1));
    CHECK(ev(0) == 0.0);
    CHECK(ev(1) > 0.0);
    CHECK((ev.array() >= 0).all());
  }
  const auto s = FactorGrid<double>::sphere(8, 2.0);
  // l(l+1)/a^2 at l = 1
  CHECK(s.eigenvalues()(1) == doctest::Approx(0.5));
  CHECK(s.mode_count() == 81);
  CHECK(FactorGrid<double>::torus(4, two_pi).mode_count() == 81);
}

TEST_CASE("resolution limits are enforced") {
  CHECK_THROWS_AS(FactorGrid<double>::sphere(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(FactorGrid<double>::torus(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(FactorGrid<double>::sphere(8, -1.0), std::invalid_argument);
}

TEST_CASE("first harmonics are the embedding coordinates") {
  const auto g = s2xt2();
  const Field z = mode_field<double>(g, g->first().mode_index(1, 0), 0);
  const Field x = mode_field<double>(g, g->first().mode_index(1, 1), 0);
  const Field y = mode_field<double>(g, g->first().mode_index(1, -1), 0);
  const Field ez = sample(g, [](double, double, double z_, double, double) { return z_; });
  const Field ex = sample(g, [](double x_, double, double, double, double) { return x_; });
  const Field ey = sample(g, [](double, double y_, double, double, double) { return y_; });
  CHECK((z.values() - ez.values()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((x.values() - ex.values()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((y.values() - ey.values()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("schmidt harmonics match closed forms") {
  const double t = 0.7, p = 1.3;
  const double c = std::cos(t), s = std::sin(t);
  CHECK(schmidt_harmonic(2, 0, t, p) == doctest::Approx((3 * c * c - 1) / 2).epsilon(1e-14));
  CHECK(schmidt_harmonic(2, 1, t, p) == doctest::Approx(std::sqrt(3.0) * s * c * std::cos(p)).epsilon(1e-14));
  CHECK(schmidt_harmonic(2, -2, t, p) == doctest::Approx(std::sqrt(3.0) / 2 * s * s * std::sin(2 * p)).epsilon(1e-14));
  CHECK(schmidt_harmonic(3, 0, t, p) == doctest::Approx((5 * c * c * c - 3 * c) / 2).epsilon(1e-14));
}

TEST_CASE("quadrature integrates products of resolved modes exactly") {
  for (const auto& f : {FactorGrid<double>::sphere(8, 1.0), FactorGrid<double>::torus(4, two_pi)}) {
    const Mat<double>& s = f.synthesis();
    const Mat<double> gram = s.transpose() * f.weights().asDiagonal() * s;
    const Mat<double> diag = f.mode_norms().asDiagonal();
    CHECK((gram - diag).cwiseAbs().maxCoeff() < 1e-12 * diag.maxCoeff());
  }
  // continuum norms: int Y_lm^2 = 4 pi / (2l + 1) (Schmidt), int cos^2 = L^2 / 2
  const auto sp = FactorGrid<double>::sphere(8, 1.0);
  for (std::size_t i = 0; i < sp.modes().size(); ++i) {
    const int l = sp.modes()[i].a;
    CHECK(sp.mode_norms()(static_cast<Eigen::Index>(i)) == doctest::Approx(4 * oracle::pi / (2 * l + 1)).epsilon(1e-13));
  }
}

TEST_CASE("zonal integrals agree with the 1-D oracle") {
  const auto g = s2xt2();
  for (double a : {0.4, -1.2, 2.0}) {
    const Field f = sample(g, [a](double, double, double z, double, double) { return std::exp(a * z); });
    const double expect = oracle::s2xt2_zonal([a](double t) { return std::exp(a * t); });
    // exp is not band-limited; Gauss-Legendre with 9 nodes is still very accurate
    CHECK(integrate(f) == doctest::Approx(expect).epsilon(1e-10));
  }
  const Field z2 = sample(g, [](double, double, double z, double, double) { return z * z; });
  CHECK(integrate(z2) == doctest::Approx(4 * oracle::pi / 3 * 4 * oracle::pi * oracle::pi).epsilon(1e-13));
}

TEST_CASE("transforms round-trip and fields cache coefficients") {
  std::mt19937_64 rng(7);
  const auto g = s2xt2();
  const Field f = random_field(g, rng);
  const Field back = synthesize(analyze(f));
  CHECK((back.values() - f.values()).cwiseAbs().maxCoeff() < 1e-12 * f.values().cwiseAbs().maxCoeff());
  Field h = f;
  CHECK(h.has_cached_coefficients());
  h.mutable_values()(0) += 1;
  CHECK_FALSE(h.has_cached_coefficients());
}

TEST_CASE("inner products and norms") {
  std::mt19937_64 rng(11);
  const auto g = s2xt2();
  const Field f = random_field(g, rng), h = random_field(g, rng);
  CHECK(inner_product(f, h) == doctest::Approx(inner_product(h, f)).epsilon(1e-14));
  CHECK(l2_norm(f) * l2_norm(f) == doctest::Approx(inner_product(f, f)).epsilon(1e-14));
  CHECK(integrate(Field::constant(g, 1.0)) == doctest::Approx(16 * std::pow(oracle::pi, 3)).epsilon(1e-13));
  const Field other(s2xt2(6, 3));
  CHECK_THROWS_AS(inner_product(f, other), GridMismatch);
}

TEST_CASE("point evaluation and sup norm of band-limited fields") {
  const auto g = s2xt2();
  const Field f = sample(g, [](double x, double, double z, double s1, double) { return z + 0.5 * x * std::cos(s1); });
  const double th = 0.3, ph = 2.0, s1 = 1.1;
  const double expect = std::cos(th) + 0.5 * std::sin(th) * std::cos(ph) * std::cos(s1);
  CHECK(evaluate(f, {th, ph}, {s1, 0.4}) == doctest::Approx(expect).epsilon(1e-13));
  const Field z = mode_field<double>(g, g->first().mode_index(1, 0), 0);
  // the poles are not Gauss nodes, so the node maximum is strictly below 1
  CHECK(z.values().maxCoeff() < 1.0);
  CHECK(sup_norm(z) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("geodesic distances") {
  const auto s = FactorGrid<double>::sphere(8, 2.0);
  CHECK(s.distance({0.0, 0.0}, {oracle::pi, 0.0}) == doctest::Approx(2 * oracle::pi));
  CHECK(s.distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  // along the equator the arc is radius * dphi, even for tiny separations
  CHECK(s.distance({oracle::pi / 2, 0.3}, {oracle::pi / 2, 0.3 + 1e-9}) == doctest::Approx(2e-9).epsilon(1e-6));
  const auto t = FactorGrid<double>::torus(4, 10.0);
  CHECK(t.distance({1.0, 1.0}, {9.0, 4.0}) == doctest::Approx(std::sqrt(4.0 + 9.0)));
  const auto g = s2xt2();
  CHECK(g->distance(0, 0) == 0.0);
  CHECK(g->distance(3, 500) == doctest::Approx(g->distance(500, 3)));
}
