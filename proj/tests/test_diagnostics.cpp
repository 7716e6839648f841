#include "qflow/diagnostics.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace testing;

namespace {

FlowConfig<double> config(double q0, const Field& u0, const Grid& g = s2xt2()) {
  return FlowConfig<double>(model_background(q0, g), Field::constant(g, 1.0), u0);
}

Field z_field(const Grid& g, double amp) {
  return sample(g, [amp](double, double, double z, double, double) { return amp * z; });
}

const double kVol = 16 * std::pow(oracle::pi, 3);

}  // namespace

TEST_CASE("functional at the origin and on constants") {
  const auto g = s2xt2();
  auto cfg = config(-2.0, Field::constant(g, 0.0));
  const double kp = cfg.background->total_q();
  CHECK(functional_II(Field::constant(g, 0.0), cfg) == doctest::Approx(-kp * std::log(kVol)).epsilon(1e-13));
  for (double c : {0.2, -0.7})
    CHECK(functional_II(Field::constant(g, c), cfg) == doctest::Approx(-kp * std::log(kVol)).epsilon(1e-12));
  // non-constant f at u = 0: -k_p log int f
  const Field bump = sample(g, [](double, double, double z, double, double) { return 1.5 + z; });
  cfg.f = bump;
  CHECK(functional_II(Field::constant(g, 0.0), cfg) == doctest::Approx(-kp * std::log(1.5 * kVol)).epsilon(1e-12));
}

TEST_CASE("functional in a kernel direction matches the 1-D oracle") {
  const auto g = s2xt2();
  const auto cfg = config(-2.0, Field::constant(g, 0.0));
  const double kp = -32 * std::pow(oracle::pi, 3);
  for (double eps : {0.05, 0.1, 0.3}) {
    const double expect = -kp * std::log(oracle::s2xt2_zonal([eps](double t) { return std::exp(4 * eps * t); }));
    CHECK(functional_II(z_field(g, eps), cfg) == doctest::Approx(expect).epsilon(1e-11));
  }
}

TEST_CASE("kernel-mode moments") {
  const auto g = s2xt2();
  const auto bg = model_background(2.0);
  const Field z = z_field(g, 1.0);
  CHECK(std::abs(moment(Field::constant(g, 0.0), z, *bg)) < 1e-12);
  const Field u = z_field(g, 0.1);
  const double expect = oracle::s2xt2_zonal([](double t) { return t * std::exp(0.4 * t); });
  const double m = moment(u, z, *bg);
  CHECK(m > 0);
  CHECK(m == doctest::Approx(expect).epsilon(1e-10));
  CHECK(moment(u, Field(g, 2 * z.values()), *bg) == doctest::Approx(2 * m).epsilon(1e-15));
  // adding a constant multiplies the moment by e^{nc} and keeps its sign
  const Field shifted(g, u.values().array() - 0.4);
  CHECK(moment(shifted, z, *bg) == doctest::Approx(std::exp(-1.6) * m).epsilon(1e-13));
}

TEST_CASE("moment-law prediction") {
  const auto g = s2xt2();
  const auto bg = model_background(2.0);
  const double v0 = 500.0;
  CHECK(moment_law_prediction(0.0, 3.0, *bg, v0) == 3.0);
  CHECK(moment_growth_rate(*bg, v0) == doctest::Approx(4 * 32 * std::pow(oracle::pi, 3) / (2 * v0)));
  const auto neg = model_background(-2.0);
  CHECK(std::abs(moment_law_prediction(1.0, 3.0, *neg, v0)) < 3.0);
  auto cfg = config(2.0, z_field(g, 0.1));
  CHECK_NOTHROW(moment_law_prediction(0.5, 1.0, cfg, v0));
  cfg.f = sample(g, [](double, double, double z, double, double) { return 2 + z; });
  CHECK_THROWS_AS(moment_law_prediction(0.5, 1.0, cfg, v0), std::domain_error);
}

TEST_CASE("stationary residual") {
  const auto g = s2xt2();
  for (double c : {0.0, 0.4}) {
    const auto cfg = config(-2.0, Field::constant(g, c));
    CHECK(residual(Field::constant(g, c), cfg).norm < 1e-13);
  }
  // residual = e^{-nu}(Pu + Q0) - k_p f / int f e^{nu}, normalized by ||Q0||
  const auto cfg = config(-2.0, Field::constant(g, 0.0));
  const Field u = z_field(g, 0.1);
  const auto r = residual(u, cfg);
  const double v = oracle::s2xt2_zonal([](double t) { return std::exp(0.4 * t); });
  const double kp = -32 * std::pow(oracle::pi, 3);
  const Field expect = sample(g, [&](double, double, double z, double, double) { return -2 * std::exp(-0.4 * z) - kp / v; });
  CHECK((r.field.values() - expect.values()).cwiseAbs().maxCoeff() < 1e-11);
  CHECK(r.norm == doctest::Approx(l2_norm(expect) / (2 * std::sqrt(kVol))).epsilon(1e-10));
}

TEST_CASE("dissipation check") {
  const auto g = s2xt2(4, 2);
  {
    const auto cfg = config(-2.0, Field::constant(g, 0.1), g);
    const auto d = dissipation_check(initial_state(cfg), cfg, 1e-3);
    CHECK(std::abs(d.lhs) < 1e-8);
    CHECK(std::abs(d.rhs) < 1e-20);
  }
  std::mt19937_64 rng(6);
  const Field u0(g, 0.2 * random_field(g, rng, 2.0).values());
  const auto cfg = config(-2.0, u0, g);
  const auto s = initial_state(cfg);
  const auto coarse = dissipation_check(s, cfg, 4e-3, 8e-3);
  const auto fine = dissipation_check(s, cfg, 2e-3, 8e-3);
  CHECK(coarse.rhs <= 0);
  CHECK(coarse.t_center == fine.t_center);
  CHECK(coarse.rhs == doctest::Approx(fine.rhs).epsilon(1e-9));
  CHECK(coarse.gap / fine.gap == doctest::Approx(4.0).epsilon(0.1));
  CHECK_THROWS_AS(dissipation_check(s, cfg, 1e-2, 5e-3), std::invalid_argument);
}

TEST_CASE("a-priori monitors") {
  std::vector<DiagnosticRow<double>> rows(8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].t = static_cast<double>(i);
    rows[i].dirichlet = 1.0;
    rows[i].a0 = -0.5;
    rows[i].sum_abs_a = 0.2;
  }
  auto m = apriori_monitors(rows, -1.0);
  CHECK(m.applicable);
  CHECK_FALSE(m.any());
  CHECK(m.dirichlet_max == m.dirichlet_quarter);
  rows.back().sum_abs_a = 5.0;
  m = apriori_monitors(rows, -1.0);
  CHECK(m.sum_a_flag);
  CHECK_FALSE(m.dirichlet_flag);
  CHECK_FALSE(apriori_monitors(rows, 1.0).applicable);
}

TEST_CASE("log slope recovers an exponential rate") {
  std::vector<double> t, m;
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.1 * i);
    m.push_back(-3.0 * std::exp(1.7 * 0.1 * i));
  }
  CHECK(log_slope(t, m) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK_THROWS_AS(log_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("blow-up bound certificate") {
  const auto g = s2xt2();
  const auto bg = model_background(2.0);
  const Field z = z_field(g, 1.0);
  const Field u0 = z_field(g, 0.1);
  const auto c = blowup_bound(u0, z, *bg, "z");
  const double v0 = oracle::s2xt2_zonal([](double t) { return std::exp(0.4 * t); });
  const double m0 = oracle::s2xt2_zonal([](double t) { return t * std::exp(0.4 * t); });
  const double kp = 32 * std::pow(oracle::pi, 3);
  CHECK(c.volume0 == doctest::Approx(v0).epsilon(1e-12));
  CHECK(c.m0 == doctest::Approx(m0).epsilon(1e-10));
  CHECK(c.sup_phi == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.t_bound_proof == doctest::Approx(2 * v0 / (4 * kp) * std::log(v0 / m0)).epsilon(1e-9));
  CHECK(c.t_bound_theorem == doctest::Approx(4 * c.t_bound_proof).epsilon(1e-14));
  CHECK(c.t_bound_proof > 0);
  CHECK(c.rate_theory == doctest::Approx(4 * kp / (2 * v0)).epsilon(1e-12));
  CHECK_FALSE(c.t_observed);

  // a constant shift scales V0 and m0 alike: bound scales by e^{nc}
  const Field shifted(g, u0.values().array() + 0.1);
  const auto cs = blowup_bound(shifted, z, *bg);
  CHECK(cs.t_bound_proof / c.t_bound_proof == doctest::Approx(std::exp(0.4)).epsilon(1e-12));

  CHECK_THROWS_AS(blowup_bound(Field::constant(g, 0.0), z, *bg), HypothesisFailure);
  CHECK_THROWS_AS(blowup_bound(u0, z, *model_background(-2.0)), HypothesisFailure);
}
