// Nodal sign-pattern condition on an N(Q) basis, its grid constants, and
// perturbation of initial data with a vanishing kernel moment.

#ifndef QFLOW_HYPOTHESIS_HPP
#define QFLOW_HYPOTHESIS_HPP

#include "qflow/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qflow {

using SignPattern = std::vector<int>;

/// Pattern number `index` over nu functions: bit j set means eps_j = -1.
inline SignPattern sign_pattern(unsigned index, int nu) {
  SignPattern eps(static_cast<std::size_t>(nu));
  for (int j = 0; j < nu; ++j) eps[static_cast<std::size_t>(j)] = (index >> j) & 1u ? -1 : 1;
  return eps;
}

template <typename Scalar>
struct NodalMargin {
  Eigen::Index node = -1;
  /// min_j eps_j phi_j(node).
  Scalar margin = 0;
  /// Geodesic distance from the node to the nearest grid node where the
  /// pattern fails (grid diameter when it never fails).
  Scalar radius = 0;
};

template <typename Scalar>
struct PatternResult {
  SignPattern signs;
  bool realized = false;
  NodalMargin<Scalar> witness;
};

template <typename Scalar>
struct SignPatternReport {
  int nu = 0;
  std::vector<PatternResult<Scalar>> patterns;
  /// min over realized patterns of the witness margins.
  Scalar c = 0;
  /// min over realized patterns of the persistence radii.
  Scalar r0 = 0;
  bool verdict = false;
  std::vector<SignPattern> missing;
  int first_resolution = 0;
  int second_resolution = 0;
};

namespace detail {

template <typename Scalar>
Mat<Scalar> basis_matrix(const std::vector<ScalarField<Scalar>>& basis) {
  if (basis.empty()) throw std::invalid_argument("empty basis");
  Mat<Scalar> m(basis.front().grid().node_count(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    require_same_grid(basis.front(), basis[j]);
    m.col(static_cast<Eigen::Index>(j)) = basis[j].values();
  }
  return m;
}

template <typename Scalar>
Vec<Scalar> pattern_margins(const Mat<Scalar>& phi, const SignPattern& eps) {
  if (static_cast<Eigen::Index>(eps.size()) != phi.cols()) throw std::invalid_argument("pattern length mismatch");
  Vec<Scalar> signs(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) signs(j) = eps[static_cast<std::size_t>(j)];
  return (phi * signs.asDiagonal()).rowwise().minCoeff();
}

template <typename Scalar>
Scalar radius_at(const ProductGrid<Scalar>& grid, const Vec<Scalar>& margins, Eigen::Index node) {
  Scalar nearest = std::numeric_limits<Scalar>::infinity();
  Scalar diameter = 0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    const Scalar d = grid.distance(node, i);
    diameter = std::max(diameter, d);
    if (margins(i) <= 0) nearest = std::min(nearest, d);
  }
  return std::isfinite(nearest) ? nearest : diameter;
}

}  // namespace detail

/// Margin and persistence radius of pattern `eps` at a chosen node.
template <typename Scalar>
NodalMargin<Scalar> nodal_margin_at(const std::vector<ScalarField<Scalar>>& basis, const SignPattern& eps,
                                    Eigen::Index node) {
  const Vec<Scalar> margins = detail::pattern_margins(detail::basis_matrix(basis), eps);
  return {node, margins(node), detail::radius_at(basis.front().grid(), margins, node)};
}

/// Best witness for pattern `eps`: the node maximizing min_j eps_j phi_j.
template <typename Scalar>
NodalMargin<Scalar> nodal_margin(const std::vector<ScalarField<Scalar>>& basis, const SignPattern& eps) {
  const Vec<Scalar> margins = detail::pattern_margins(detail::basis_matrix(basis), eps);
  Eigen::Index best = 0;
  margins.maxCoeff(&best);
  if (!(margins(best) > 0)) throw std::domain_error("sign pattern is not realized on the grid");
  return {best, margins(best), detail::radius_at(basis.front().grid(), margins, best)};
}

template <typename Scalar>
SignPatternReport<Scalar> check_sign_condition(const std::vector<ScalarField<Scalar>>& basis) {
  const auto nu = static_cast<int>(basis.size());
  if (nu < 1 || nu > 8) throw std::invalid_argument("sign condition check supports 1 <= nu <= 8");
  const Mat<Scalar> phi = detail::basis_matrix(basis);
  const auto& grid = basis.front().grid();
  SignPatternReport<Scalar> rep;
  rep.nu = nu;
  rep.first_resolution = grid.first().resolution();
  rep.second_resolution = grid.second().resolution();
  rep.c = std::numeric_limits<Scalar>::infinity();
  rep.r0 = std::numeric_limits<Scalar>::infinity();
  for (unsigned idx = 0; idx < (1u << nu); ++idx) {
    PatternResult<Scalar> pr;
    pr.signs = sign_pattern(idx, nu);
    const Vec<Scalar> margins = detail::pattern_margins(phi, pr.signs);
    Eigen::Index best = 0;
    margins.maxCoeff(&best);
    pr.realized = margins(best) > 0;
    if (pr.realized) {
      pr.witness = {best, margins(best), detail::radius_at(grid, margins, best)};
      rep.c = std::min(rep.c, pr.witness.margin);
      rep.r0 = std::min(rep.r0, pr.witness.radius);
    } else {
      rep.missing.push_back(pr.signs);
    }
    rep.patterns.push_back(std::move(pr));
  }
  rep.verdict = rep.missing.empty();
  if (!std::isfinite(rep.c)) rep.c = 0;
  if (!std::isfinite(rep.r0)) rep.r0 = 0;
  return rep;
}

template <typename Scalar>
struct Perturbation {
  ScalarField<Scalar> field;
  bool changed = false;
  Scalar delta = 0;
  /// (1/k) int (h + delta) phi: the moment created by the perturbation.
  Scalar margin = 0;
  /// int phi e^{n v_k}.
  Scalar moment = 0;
};

/// v_k = (1/n) log(e^{nv} + (h + delta)/k) where h is a squared-cosine cap
/// on {phi > max(phi)/2} and delta is half the largest admissible value,
/// so that int phi e^{n v_k} > 0.  Returns v when its moment is nonzero.
template <typename Scalar>
Perturbation<Scalar> perturb_initial(const ScalarField<Scalar>& v, const ScalarField<Scalar>& phi, int k, int n) {
  require_same_grid(v, phi);
  if (k < 1) throw std::invalid_argument("k must be positive");
  const Scalar peak = phi.values().maxCoeff();
  const Scalar sup = phi.values().cwiseAbs().maxCoeff();
  if (!(sup > 0)) throw std::invalid_argument("phi vanishes identically");
  const Scalar m = moment(v, phi, n);
  const Scalar vol = integrate(ScalarField<Scalar>(v.grid_ptr(), (Scalar(n) * v.values().array()).exp()));
  if (std::abs(m) > Scalar(1e-12) * sup * vol || !(peak > 0)) return {v, false, 0, 0, m};

  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  const Vec<Scalar>& p = phi.values();
  Vec<Scalar> h = Vec<Scalar>::Zero(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar s = (p(i) - peak / 2) / (peak / 2);
    if (s > 0) h(i) = std::sin(half_pi * s) * std::sin(half_pi * s);
  }
  const auto w = v.grid().weights().reshaped();
  const Scalar plus = (w.array() * h.array() * p.array()).sum();
  const Scalar minus = (w.array() * p.array().min(Scalar(0))).sum();
  const Scalar delta = minus < 0 ? plus / (-minus) / 2 : Scalar(1);
  const Vec<Scalar> bump = h.array() + delta;
  Vec<Scalar> vk = ((Scalar(n) * v.values().array()).exp() + bump.array() / Scalar(k)).log() / Scalar(n);
  ScalarField<Scalar> out(v.grid_ptr(), std::move(vk));
  const Scalar margin = (w.array() * bump.array() * p.array()).sum() / Scalar(k);
  const Scalar mk = moment(out, phi, n);
  return {std::move(out), true, delta, margin, mk};
}

}  // namespace qflow

#endif  // QFLOW_HYPOTHESIS_HPP
