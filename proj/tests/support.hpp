#ifndef QFLOW_TESTS_SUPPORT_HPP
#define QFLOW_TESTS_SUPPORT_HPP

#include "qflow/conformal_operator.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace testing {

using namespace qflow;
using Field = ScalarField<double>;
using Grid = GridPtr<double>;

inline constexpr double two_pi = 2 * std::numbers::pi;

/// S^2(1) x T^2(2 pi) at the requested resolution; cached for the default.
inline Grid s2xt2(int l_max = 8, int k_max = 4) {
  static const Grid fine = make_product_grid(FactorGrid<double>::sphere(8, 1.0), FactorGrid<double>::torus(4, two_pi));
  if (l_max == 8 && k_max == 4) return fine;
  return make_product_grid(FactorGrid<double>::sphere(l_max, 1.0), FactorGrid<double>::torus(k_max, two_pi));
}

inline Grid t2xt2(int k_max = 4) {
  static const Grid fine = make_product_grid(FactorGrid<double>::torus(4, two_pi), FactorGrid<double>::torus(4, two_pi));
  if (k_max == 4) return fine;
  return make_product_grid(FactorGrid<double>::torus(k_max, two_pi), FactorGrid<double>::torus(k_max, two_pi));
}

/// Node values of a function of the embedding coordinates (x, y, z) of the
/// sphere and the torus coordinates (s1, s2).
template <typename F>
Field sample(const Grid& g, F&& fn) {
  Vec<double> v(g->node_count());
  for (Eigen::Index j = 0; j < g->second().node_count(); ++j)
    for (Eigen::Index i = 0; i < g->first().node_count(); ++i) {
      const auto& p = g->first().nodes()[static_cast<std::size_t>(i)];
      const auto& q = g->second().nodes()[static_cast<std::size_t>(j)];
      const double x = std::sin(p[0]) * std::cos(p[1]), y = std::sin(p[0]) * std::sin(p[1]), z = std::cos(p[0]);
      v(i + g->first().node_count() * j) = fn(x, y, z, q[0], q[1]);
    }
  return Field(g, std::move(v));
}

/// Band-limited field with independent standard normal coefficients.
inline Field random_field(const Grid& g, std::mt19937_64& rng, double decay = 1.0) {
  std::normal_distribution<double> normal;
  Mat<double> c(g->first().mode_count(), g->second().mode_count());
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      c(i, j) = normal(rng) / std::pow(1 + g->lambda()(i, j) + g->mu()(i, j), decay);
  return synthesize(Coefficients<double>{g, c});
}

inline BackgroundPtr<double> model_background(double q0, const Grid& g = s2xt2()) {
  return make_background(model_s2xt2_operator(g), Field::constant(g, q0), 4);
}

}  // namespace testing

#endif  // QFLOW_TESTS_SUPPORT_HPP
