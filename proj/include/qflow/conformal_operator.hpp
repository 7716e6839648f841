// GJMS-type model operators defined by spectral symbols, background
// Q-curvature data and the kernel decomposition used by the flow.

#ifndef QFLOW_CONFORMAL_OPERATOR_HPP
#define QFLOW_CONFORMAL_OPERATOR_HPP

#include "qflow/spectral_geometry.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qflow {

/// Raised when n * max|u| leaves the range where e^{+-nu} is usable.
class ExponentCapExceeded : public std::runtime_error {
 public:
  explicit ExponentCapExceeded(double value)
      : std::runtime_error("conformal exponent n*max|u| = " + std::to_string(value) + " exceeds cap"),
        value_(value) {}
  double value() const { return value_; }

 private:
  double value_;
};

inline constexpr double kDefaultExponentCap = 300.0;

/// Self-adjoint nonnegative operator diagonal in the product mode basis.
template <typename Scalar>
class SpectralOperator {
 public:
  struct ModeIndex {
    Eigen::Index first;
    Eigen::Index second;
  };

  SpectralOperator(GridPtr<Scalar> grid, Mat<Scalar> symbol, std::string id)
      : grid_(std::move(grid)), symbol_(std::move(symbol)), id_(std::move(id)) {
    if (symbol_.rows() != grid_->first().mode_count() || symbol_.cols() != grid_->second().mode_count())
      throw GridMismatch();
    max_symbol_ = symbol_.maxCoeff();
    if (symbol_.minCoeff() < -1e-12 * max_symbol_)
      throw std::invalid_argument("operator symbol must be nonnegative");
    const Scalar zero_tol = Scalar(1e-12) * max_symbol_;
    first_positive_ = max_symbol_;
    // constant mode first, then the remaining kernel modes in mode order
    for (Eigen::Index j = 0; j < symbol_.cols(); ++j)
      for (Eigen::Index i = 0; i < symbol_.rows(); ++i) {
        if (symbol_(i, j) <= zero_tol) {
          symbol_(i, j) = 0;
          kernel_.push_back({i, j});
        } else {
          first_positive_ = std::min(first_positive_, symbol_(i, j));
        }
      }
    if (kernel_.empty() || kernel_.front().first != 0 || kernel_.front().second != 0)
      throw std::invalid_argument("operator must annihilate constants");
  }

  const ProductGrid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Mat<Scalar>& symbol() const { return symbol_; }
  const std::string& id() const { return id_; }
  /// Kernel modes; the constant mode is always first.
  const std::vector<ModeIndex>& kernel_modes() const { return kernel_; }
  /// Smallest positive symbol value.
  Scalar first_positive() const { return first_positive_; }
  Scalar max_symbol() const { return max_symbol_; }

 private:
  GridPtr<Scalar> grid_;
  Mat<Scalar> symbol_;
  std::string id_;
  std::vector<ModeIndex> kernel_;
  Scalar first_positive_ = 0;
  Scalar max_symbol_ = 0;
};

template <typename Scalar>
using OperatorPtr = std::shared_ptr<const SpectralOperator<Scalar>>;

/// Model Paneitz-type operator on S^2(1) x T^2(L):
/// sigma(lambda, mu) = (lambda + mu)^2 - 2 lambda + 2 mu.
/// Its kernel is the constants together with the three first spherical
/// harmonics.
template <typename Scalar>
Scalar model_symbol(Scalar lambda, Scalar mu) {
  return (lambda + mu) * (lambda + mu) - 2 * lambda + 2 * mu;
}

template <typename Scalar>
OperatorPtr<Scalar> model_s2xt2_operator(const GridPtr<Scalar>& grid) {
  if (grid->first().kind() != FactorKind::sphere || grid->second().kind() != FactorKind::torus)
    throw std::invalid_argument("model_s2xt2 operator needs a sphere x torus grid");
  if (std::abs(grid->first().size() - 1) > Scalar(1e-14))
    throw std::invalid_argument("model_s2xt2 operator is calibrated for a unit sphere");
  Mat<Scalar> symbol = grid->lambda().binaryExpr(grid->mu(), [](Scalar l, Scalar m) { return model_symbol(l, m); });
  return std::make_shared<const SpectralOperator<Scalar>>(grid, std::move(symbol), "model_s2xt2");
}

/// Flat model sigma = (lambda + mu)^2 on T^2 x T^2; kernel is the constants.
template <typename Scalar>
OperatorPtr<Scalar> flat_t4_operator(const GridPtr<Scalar>& grid) {
  if (grid->first().kind() != FactorKind::torus || grid->second().kind() != FactorKind::torus)
    throw std::invalid_argument("flat_t4 operator needs a torus x torus grid");
  Mat<Scalar> symbol = (grid->lambda() + grid->mu()).array().square().matrix();
  return std::make_shared<const SpectralOperator<Scalar>>(grid, std::move(symbol), "flat_t4");
}

/// Multiply the spectral content of `u` by `multiplier` (M1 x M2).
template <typename Scalar>
ScalarField<Scalar> spectral_multiply(const Mat<Scalar>& multiplier, const ScalarField<Scalar>& u) {
  Mat<Scalar> c = multiplier.cwiseProduct(u.coefficients());
  return synthesize(Coefficients<Scalar>{u.grid_ptr(), std::move(c)});
}

template <typename Scalar>
ScalarField<Scalar> apply(const SpectralOperator<Scalar>& op, const ScalarField<Scalar>& u) {
  if (u.grid_ptr() != op.grid_ptr()) throw GridMismatch();
  // P kills constants, so the mean can be dropped before transforming
  const Scalar mean = u.values().mean();
  if (mean == 0) return spectral_multiply(op.symbol(), u);
  return spectral_multiply(op.symbol(), ScalarField<Scalar>(u.grid_ptr(), (u.values().array() - mean).matrix()));
}

template <typename Scalar>
struct KernelCoefficients {
  Scalar a0 = 0;
  Vec<Scalar> a;
};

/// Operator, background Q-curvature and the kernel decomposition
/// N(P) = R + N(Q) (constants plus the Q-orthogonal kernel part).
template <typename Scalar>
class ConformalBackground {
 public:
  ConformalBackground(OperatorPtr<Scalar> op, ScalarField<Scalar> q0, int dimension, std::string q0_description = {})
      : op_(std::move(op)), q0_(std::move(q0)), n_(dimension), q0_description_(std::move(q0_description)) {
    if (dimension < 2 || dimension % 2 != 0) throw std::invalid_argument("dimension must be even");
    if (q0_.grid_ptr() != op_->grid_ptr()) throw GridMismatch();
    k_p_ = integrate(q0_);
    const auto& grid = op_->grid_ptr();
    std::vector<ScalarField<Scalar>> psi;
    for (std::size_t i = 1; i < op_->kernel_modes().size(); ++i) {
      const auto& km = op_->kernel_modes()[i];
      psi.push_back(mode_field<Scalar>(grid, km.first, km.second));
      const auto& f1 = grid->first().modes()[static_cast<std::size_t>(km.first)];
      const auto& f2 = grid->second().modes()[static_cast<std::size_t>(km.second)];
      labels_.push_back("mode(" + std::to_string(f1.a) + "," + std::to_string(f1.b) + ";" + std::to_string(f2.a) +
                        "," + std::to_string(f2.b) + ")");
    }
    kernel_basis_.push_back(ScalarField<Scalar>::constant(grid, 1));
    if (has_decomposition()) {
      // phi_j = psi_j - (int Q0 psi_j / k_p): the unique element of N(Q)
      // with unit coefficient on psi_j; then L2-orthogonalized in order.
      for (auto& p : psi) {
        const Scalar shift = inner_product(q0_, p) / k_p_;
        Vec<Scalar> v = p.values().array() - shift;
        for (const auto& prev : nq_basis_) {
          const Scalar c = inner_product(ScalarField<Scalar>(grid, v), prev) / inner_product(prev, prev);
          v -= c * prev.values();
        }
        nq_basis_.emplace_back(grid, std::move(v));
      }
      for (const auto& phi : nq_basis_) kernel_basis_.push_back(phi);
    } else {
      for (const auto& p : psi) kernel_basis_.push_back(p);
    }
    const auto m = static_cast<Eigen::Index>(kernel_basis_.size());
    gram_.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        gram_(i, j) = gram_(j, i) = inner_product(kernel_basis_[static_cast<std::size_t>(i)],
                                                  kernel_basis_[static_cast<std::size_t>(j)]);
    gram_solver_.compute(gram_);
    if (gram_solver_.rank() < m) throw std::runtime_error("kernel basis Gram matrix is singular");
  }

  const SpectralOperator<Scalar>& op() const { return *op_; }
  const OperatorPtr<Scalar>& op_ptr() const { return op_; }
  const ProductGrid<Scalar>& grid() const { return op_->grid(); }
  const GridPtr<Scalar>& grid_ptr() const { return op_->grid_ptr(); }
  const ScalarField<Scalar>& q0() const { return q0_; }
  const std::string& q0_description() const { return q0_description_; }
  int dimension() const { return n_; }
  Scalar total_q() const { return k_p_; }
  /// dim N(P) - 1.
  int nu() const { return static_cast<int>(kernel_basis_.size()) - 1; }
  /// False when k_p vanishes (to quadrature rounding) and N(Q) does not
  /// complement the constants.
  bool has_decomposition() const {
    const Scalar scale = q0_.values().cwiseAbs().maxCoeff() * grid().volume();
    return std::abs(k_p_) > Scalar(1e-12) * scale && scale > 0;
  }
  /// {1, phi_1, ..., phi_nu}.
  const std::vector<ScalarField<Scalar>>& kernel_basis() const { return kernel_basis_; }
  const std::vector<ScalarField<Scalar>>& nq_fields() const { return nq_basis_; }
  /// Labels of the kernel modes each basis field descends from.
  const std::vector<std::string>& nq_labels() const { return labels_; }
  const Mat<Scalar>& gram() const { return gram_; }
  const Eigen::FullPivLU<Mat<Scalar>>& gram_solver() const { return gram_solver_; }

 private:
  OperatorPtr<Scalar> op_;
  ScalarField<Scalar> q0_;
  int n_;
  std::string q0_description_;
  Scalar k_p_ = 0;
  std::vector<ScalarField<Scalar>> kernel_basis_;
  std::vector<ScalarField<Scalar>> nq_basis_;
  std::vector<std::string> labels_;
  Mat<Scalar> gram_;
  Eigen::FullPivLU<Mat<Scalar>> gram_solver_;
};

template <typename Scalar>
using BackgroundPtr = std::shared_ptr<const ConformalBackground<Scalar>>;

template <typename Scalar>
BackgroundPtr<Scalar> make_background(OperatorPtr<Scalar> op, ScalarField<Scalar> q0, int dimension,
                                      std::string description = {}) {
  return std::make_shared<const ConformalBackground<Scalar>>(std::move(op), std::move(q0), dimension,
                                                             std::move(description));
}

template <typename Scalar>
Scalar total_q(const ConformalBackground<Scalar>& bg) {
  return bg.total_q();
}

/// Basis of N(Q) = {u in N(P) : int Q0 u = 0}, L2-orthogonal, each element
/// carrying unit coefficient on the kernel mode it descends from.
template <typename Scalar>
const std::vector<ScalarField<Scalar>>& nq_basis(const ConformalBackground<Scalar>& bg) {
  if (!bg.has_decomposition()) throw std::domain_error("total Q-curvature vanishes: N(P) = R + N(Q) unavailable");
  return bg.nq_fields();
}

/// Coefficients of the L2-orthogonal projection of u onto N(P) in the
/// (generally non-orthogonal) basis {1, phi_1, ..., phi_nu}.
template <typename Scalar>
KernelCoefficients<Scalar> project_kernel(const ScalarField<Scalar>& u, const ConformalBackground<Scalar>& bg) {
  const auto& basis = bg.kernel_basis();
  Vec<Scalar> rhs(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = inner_product(u, basis[i]);
  const Vec<Scalar> sol = bg.gram_solver().solve(rhs);
  return {sol(0), sol.tail(sol.size() - 1)};
}

template <typename Scalar>
ScalarField<Scalar> reconstruct(const KernelCoefficients<Scalar>& c, const ConformalBackground<Scalar>& bg) {
  const auto& basis = bg.kernel_basis();
  Vec<Scalar> v = Vec<Scalar>::Constant(bg.grid().node_count(), c.a0);
  for (Eigen::Index j = 0; j < c.a.size(); ++j) v += c.a(j) * basis[static_cast<std::size_t>(j + 1)].values();
  return ScalarField<Scalar>(bg.grid_ptr(), std::move(v));
}

template <typename Scalar>
void check_exponent(const ScalarField<Scalar>& u, int n, double cap) {
  const double e = static_cast<double>(n * u.values().cwiseAbs().maxCoeff());
  if (!(e <= cap)) throw ExponentCapExceeded(e);
}

/// Q-curvature of e^{2u} g0: e^{-nu} (P u + Q0).
template <typename Scalar>
ScalarField<Scalar> q_curvature(const ScalarField<Scalar>& u, const ConformalBackground<Scalar>& bg,
                                double exponent_cap = kDefaultExponentCap) {
  require_same_grid(u, bg.q0());
  check_exponent(u, bg.dimension(), exponent_cap);
  const ScalarField<Scalar> pu = apply(bg.op(), u);
  Vec<Scalar> v = (-Scalar(bg.dimension()) * u.values().array()).exp() * (pu.values() + bg.q0().values()).array();
  return ScalarField<Scalar>(u.grid_ptr(), std::move(v));
}

}  // namespace qflow

#endif  // QFLOW_CONFORMAL_OPERATOR_HPP
