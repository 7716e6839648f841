#include "qflow/conformal_operator.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace testing;

TEST_CASE("model symbol and its kernel") {
  CHECK(model_symbol(0.0, 0.0) == 0.0);
  CHECK(model_symbol(2.0, 0.0) == 0.0);
  CHECK(model_symbol(0.0, 1.0) == 3.0);
  CHECK(model_symbol(6.0, 0.0) == 24.0);

  const auto op = model_s2xt2_operator(s2xt2());
  REQUIRE(op->kernel_modes().size() == 4);
  const auto& sphere = s2xt2()->first();
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(sphere.modes()[static_cast<std::size_t>(op->kernel_modes()[i].first)].a == 1);
    CHECK(op->kernel_modes()[i].second == 0);
  }
  CHECK(op->first_positive() == doctest::Approx(3.0));
  // l = 8 and k1 = k2 = 4: (72 + 32)^2 - 144 + 64
  CHECK(op->max_symbol() == doctest::Approx(10736.0));
}

TEST_CASE("operator factories reject mismatched grids") {
  CHECK_THROWS_AS(model_s2xt2_operator(t2xt2()), std::invalid_argument);
  CHECK_THROWS_AS(flat_t4_operator(s2xt2()), std::invalid_argument);
  const auto big = make_product_grid(FactorGrid<double>::sphere(6, 2.0), FactorGrid<double>::torus(3, two_pi));
  CHECK_THROWS_AS(model_s2xt2_operator(big), std::invalid_argument);
}

TEST_CASE("flat T4 operator annihilates only constants") {
  const auto op = flat_t4_operator(t2xt2());
  CHECK(op->kernel_modes().size() == 1);
  CHECK(op->first_positive() == doctest::Approx(1.0));
}

TEST_CASE("symbols must be nonnegative and annihilate constants") {
  const auto g = s2xt2(4, 2);
  Mat<double> bad = g->lambda() + g->mu();
  bad(3, 3) = -1;
  CHECK_THROWS_AS(SpectralOperator<double>(g, bad, "bad"), std::invalid_argument);
  Mat<double> shifted = (g->lambda() + g->mu()).array() + 1.0;
  CHECK_THROWS_AS(SpectralOperator<double>(g, shifted, "shifted"), std::invalid_argument);
}

TEST_CASE("P is self-adjoint, nonnegative and kills the kernel") {
  const auto g = s2xt2();
  const auto op = model_s2xt2_operator(g);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Field u = random_field(g, rng), v = random_field(g, rng);
    const double a = inner_product(apply(*op, u), v), b = inner_product(u, apply(*op, v));
    CHECK(std::abs(a - b) <= 1e-10 * (1 + std::abs(a)));
    CHECK(inner_product(apply(*op, u), u) >= 0);
  }
  const Field z = sample(g, [](double, double, double z_, double, double) { return z_; });
  CHECK(l2_norm(apply(*op, z)) < 1e-10);
}

TEST_CASE("P acts on a product mode by its symbol") {
  const auto g = s2xt2();
  const auto op = model_s2xt2_operator(g);
  // Y_2^0 (lambda = 6) times cos(s1) (mu = 1): sigma = 49 - 12 + 2 = 39
  const Field u = sample(g, [](double, double, double z, double s1, double) { return (3 * z * z - 1) / 2 * std::cos(s1); });
  const Field pu = apply(*op, u);
  CHECK((pu.values() - 39 * u.values()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("background for constant negative Q0") {
  const auto bg = model_background(-2.0);
  CHECK(bg->total_q() == doctest::Approx(-32 * std::pow(oracle::pi, 3)).epsilon(1e-13));
  CHECK(total_q(*bg) == bg->total_q());
  CHECK(bg->nu() == 3);
  CHECK(bg->has_decomposition());
  const auto& basis = nq_basis(*bg);
  REQUIRE(basis.size() == 3);
  // Q0 constant: N(Q) is spanned by y, z, x themselves (mode order m = -1, 0, 1)
  const Field y = sample(s2xt2(), [](double, double y_, double, double, double) { return y_; });
  CHECK((basis[0].values() - y.values()).cwiseAbs().maxCoeff() < 1e-13);
  for (const auto& phi : basis) CHECK(std::abs(inner_product(bg->q0(), phi)) < 1e-10);
}

TEST_CASE("N(Q) basis for a non-constant Q0") {
  const auto g = s2xt2();
  const Field q0 = sample(g, [](double x, double, double z, double, double) { return -2 + 0.5 * z + 0.3 * x; });
  const auto bg = make_background(model_s2xt2_operator(g), q0, 4);
  const auto& basis = bg->nq_fields();
  REQUIRE(basis.size() == 3);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    CHECK(std::abs(inner_product(q0, basis[i])) < 1e-10 * l2_norm(basis[i]) * l2_norm(q0));
    for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(inner_product(basis[i], basis[j])) < 1e-10 * 500);
    CHECK(l2_norm(apply(bg->op(), basis[i])) < 1e-9);
  }
}

TEST_CASE("zero total curvature has no N(Q) decomposition") {
  const auto bg = make_background(flat_t4_operator(t2xt2()), Field::constant(t2xt2(), 0.0), 4);
  CHECK_FALSE(bg->has_decomposition());
  CHECK(bg->nu() == 0);
  CHECK_THROWS_AS(nq_basis(*bg), std::domain_error);
}

TEST_CASE("kernel projection reconstructs kernel elements") {
  const auto bg = model_background(-2.0);
  const auto g = s2xt2();
  const Field u = sample(g, [](double x, double y, double z, double, double) { return 0.3 - 0.2 * x + 0.7 * y + 0.1 * z; });
  const auto c = project_kernel(u, *bg);
  CHECK(c.a0 == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(c.a.size() == 3);
  CHECK(c.a(0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(c.a(1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.a(2) == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK((reconstruct(c, *bg).values() - u.values()).cwiseAbs().maxCoeff() < 1e-12);
  // the projection ignores everything orthogonal to the kernel
  std::mt19937_64 rng(5);
  Field w = random_field(g, rng);
  const auto cw = project_kernel(w, *bg);
  const Field rest(g, w.values() - reconstruct(cw, *bg).values());
  for (const auto& k : bg->kernel_basis()) CHECK(std::abs(inner_product(rest, k)) < 1e-10);
}

TEST_CASE("q-curvature transformation law") {
  const auto bg = model_background(-2.0);
  const auto g = s2xt2();
  CHECK((q_curvature(Field::constant(g, 0.0), *bg).values().array() + 2).abs().maxCoeff() < 1e-14);
  // constant shift c: Q = e^{-4c} Q0
  const Field c = Field::constant(g, 0.25);
  CHECK((q_curvature(c, *bg).values().array() + 2 * std::exp(-1.0)).abs().maxCoeff() < 1e-12);
  // kernel direction: P u = 0 so Q = e^{-4u} Q0 pointwise
  const Field u = sample(g, [](double, double, double z, double, double) { return 0.1 * z; });
  const Field q = q_curvature(u, *bg);
  CHECK((q.values().array() + 2 * (-4 * u.values().array()).exp()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("exponent cap") {
  const auto bg = model_background(-2.0);
  const Field big = Field::constant(s2xt2(), 80.0);
  CHECK_THROWS_AS(q_curvature(big, *bg), ExponentCapExceeded);
  CHECK_NOTHROW(check_exponent(big, 4, 400.0));
}
