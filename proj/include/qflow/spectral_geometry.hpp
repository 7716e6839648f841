// Quadrature grids, spectral transforms and the discrete L2 pairing on
// products of model factor manifolds (round sphere, flat square torus).

#ifndef QFLOW_SPECTRAL_GEOMETRY_HPP
#define QFLOW_SPECTRAL_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace qflow {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class GridMismatch : public std::invalid_argument {
 public:
  GridMismatch() : std::invalid_argument("fields live on different grids") {}
};

enum class FactorKind { sphere, torus };

inline const char* to_string(FactorKind kind) {
  return kind == FactorKind::sphere ? "sphere" : "torus";
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
///
/// Golub-Welsch on the Jacobi matrix, then Newton-polished against the
/// three-term recurrence so the nodes are accurate to the working precision.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> gauss_legendre(int count) {
  if (count < 1) throw std::invalid_argument("gauss_legendre: count < 1");
  Mat<Scalar> jacobi = Mat<Scalar>::Zero(count, count);
  for (int k = 1; k < count; ++k) {
    const Scalar b = Scalar(k) / std::sqrt(Scalar(4 * k * k - 1));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(jacobi);
  Vec<Scalar> x = solver.eigenvalues();
  Vec<Scalar> w(count);
  for (int i = 0; i < count; ++i) {
    Scalar xi = x(i);
    Scalar dp = 1;
    for (int iter = 0; iter < 4; ++iter) {
      Scalar p0 = 1, p1 = xi;
      for (int k = 2; k <= count; ++k) {
        const Scalar p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = count * (xi * p1 - p0) / (xi * xi - 1);
      xi -= p1 / dp;
    }
    x(i) = xi;
    w(i) = 2 / ((1 - xi * xi) * dp * dp);
  }
  return {x, w};
}

/// Schmidt semi-normalized real spherical harmonic without Condon-Shortley
/// phase: Y(l,0) = P_l(cos t), Y(l,m>0) = sqrt(2(l-m)!/(l+m)!) P_l^m cos(m p),
/// Y(l,m<0) uses sin(|m| p).  Y(1,-1), Y(1,0), Y(1,1) are y, z, x.
template <typename Scalar>
Scalar schmidt_harmonic(int l, int m, Scalar theta, Scalar phi) {
  const int am = m < 0 ? -m : m;
  const Scalar ct = std::cos(theta);
  const Scalar st = std::sin(theta);
  // N(l,am) = sqrt((l-am)!/(l+am)!) P_l^am
  Scalar nmm = 1;
  for (int k = 1; k <= am; ++k) nmm *= std::sqrt(Scalar(2 * k - 1) / Scalar(2 * k)) * st;
  Scalar value = nmm;
  if (l > am) {
    Scalar prev = nmm;
    Scalar cur = std::sqrt(Scalar(2 * am + 1)) * ct * nmm;
    for (int k = am + 2; k <= l; ++k) {
      const Scalar next = (Scalar(2 * k - 1) * ct * cur -
                           std::sqrt(Scalar((k - 1) * (k - 1) - am * am)) * prev) /
                          std::sqrt(Scalar(k * k - am * am));
      prev = cur;
      cur = next;
    }
    value = cur;
  }
  if (m == 0) return value;
  const Scalar s2 = std::sqrt(Scalar(2));
  return m > 0 ? s2 * value * std::cos(am * phi) : s2 * value * std::sin(am * phi);
}

/// One-dimensional real Fourier mode on a circle of length `length`:
/// k > 0 is cos, k < 0 is sin, k = 0 is the constant.
template <typename Scalar>
Scalar fourier_mode(int k, Scalar x, Scalar length) {
  const Scalar arg = 2 * std::numbers::pi_v<Scalar> * x / length;
  if (k == 0) return 1;
  return k > 0 ? std::cos(k * arg) : std::sin(-k * arg);
}

/// Quadrature and transform data for one factor manifold.
///
/// Modes are real Laplacian eigenfunctions, mutually orthogonal under the
/// quadrature pairing; mode norms are the quadrature norms, so
/// forward(backward(c)) == c to rounding.
template <typename Scalar>
class FactorGrid {
 public:
  struct Mode {
    int a;  // sphere: degree l;  torus: k1
    int b;  // sphere: order m;   torus: k2
  };

  FactorKind kind() const { return kind_; }
  int resolution() const { return resolution_; }
  Scalar size() const { return size_; }
  Eigen::Index node_count() const { return weights_.size(); }
  Eigen::Index mode_count() const { return eigenvalues_.size(); }

  /// Node coordinates: sphere (theta, phi), torus (x1, x2).
  const std::vector<std::array<Scalar, 2>>& nodes() const { return nodes_; }
  const Vec<Scalar>& weights() const { return weights_; }
  const Vec<Scalar>& eigenvalues() const { return eigenvalues_; }
  const std::vector<Mode>& modes() const { return modes_; }
  const Vec<Scalar>& mode_norms() const { return mode_norms_; }
  const Mat<Scalar>& synthesis() const { return synthesis_; }
  const Mat<Scalar>& analysis() const { return analysis_; }

  Scalar volume() const {
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    return kind_ == FactorKind::sphere ? 4 * pi * size_ * size_ : size_ * size_;
  }

  /// Index of the mode with the given labels, or -1.
  Eigen::Index mode_index(int a, int b) const {
    for (std::size_t i = 0; i < modes_.size(); ++i)
      if (modes_[i].a == a && modes_[i].b == b) return static_cast<Eigen::Index>(i);
    return -1;
  }

  Scalar evaluate_mode(Eigen::Index mode, const std::array<Scalar, 2>& point) const {
    const Mode& md = modes_[static_cast<std::size_t>(mode)];
    if (kind_ == FactorKind::sphere) return schmidt_harmonic(md.a, md.b, point[0], point[1]);
    return fourier_mode(md.a, point[0], size_) * fourier_mode(md.b, point[1], size_);
  }

  /// Geodesic distance between two points of this factor.
  Scalar distance(const std::array<Scalar, 2>& p, const std::array<Scalar, 2>& q) const {
    if (kind_ == FactorKind::sphere) {
      // haversine form: well conditioned for nearby points
      const Scalar a = std::sin((p[0] - q[0]) / 2), b = std::sin((p[1] - q[1]) / 2);
      const Scalar h = a * a + std::sin(p[0]) * std::sin(q[0]) * b * b;
      return 2 * size_ * std::asin(std::sqrt(std::clamp(h, Scalar(0), Scalar(1))));
    }
    Scalar d2 = 0;
    for (int i = 0; i < 2; ++i) {
      Scalar d = std::abs(p[i] - q[i]);
      d = std::min(d, size_ - d);
      d2 += d * d;
    }
    return std::sqrt(d2);
  }

  /// Coefficients of the node values in `values` (nodes x batch).
  template <typename Derived>
  Mat<Scalar> forward(const Eigen::MatrixBase<Derived>& values) const {
    if (values.rows() != node_count()) throw GridMismatch();
    return analysis_ * values;
  }

  template <typename Derived>
  Mat<Scalar> backward(const Eigen::MatrixBase<Derived>& coefficients) const {
    if (coefficients.rows() != mode_count()) throw GridMismatch();
    return synthesis_ * coefficients;
  }

  static FactorGrid sphere(int l_max, Scalar radius);
  static FactorGrid torus(int k_max, Scalar side);

 private:
  FactorGrid() = default;
  void finish();

  FactorKind kind_ = FactorKind::sphere;
  int resolution_ = 0;
  Scalar size_ = 1;
  std::vector<std::array<Scalar, 2>> nodes_;
  Vec<Scalar> weights_;
  Vec<Scalar> eigenvalues_;
  std::vector<Mode> modes_;
  Vec<Scalar> mode_norms_;
  Mat<Scalar> synthesis_;
  Mat<Scalar> analysis_;
};

template <typename Scalar>
FactorGrid<Scalar> FactorGrid<Scalar>::sphere(int l_max, Scalar radius) {
  if (l_max < 4) throw std::invalid_argument("sphere grid needs l_max >= 4");
  if (!(radius > 0)) throw std::invalid_argument("sphere radius must be positive");
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  FactorGrid g;
  g.kind_ = FactorKind::sphere;
  g.resolution_ = l_max;
  g.size_ = radius;
  const int n_theta = l_max + 1;
  const int n_phi = 2 * l_max + 2;
  auto [x, w] = gauss_legendre<Scalar>(n_theta);
  g.weights_.resize(n_theta * n_phi);
  for (int ip = 0; ip < n_phi; ++ip) {
    const Scalar phi = 2 * pi * ip / n_phi;
    for (int it = 0; it < n_theta; ++it) {
      g.nodes_.push_back({std::acos(x(it)), phi});
      g.weights_(it + n_theta * ip) = radius * radius * w(it) * 2 * pi / n_phi;
    }
  }
  g.eigenvalues_.resize((l_max + 1) * (l_max + 1));
  for (int l = 0; l <= l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      g.eigenvalues_(static_cast<Eigen::Index>(g.modes_.size())) = Scalar(l * (l + 1)) / (radius * radius);
      g.modes_.push_back({l, m});
    }
  g.finish();
  return g;
}

template <typename Scalar>
FactorGrid<Scalar> FactorGrid<Scalar>::torus(int k_max, Scalar side) {
  if (k_max < 2) throw std::invalid_argument("torus grid needs k_max >= 2");
  if (!(side > 0)) throw std::invalid_argument("torus side must be positive");
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  FactorGrid g;
  g.kind_ = FactorKind::torus;
  g.resolution_ = k_max;
  g.size_ = side;
  const int n = 2 * k_max + 1;
  g.weights_.resize(n * n);
  for (int j2 = 0; j2 < n; ++j2)
    for (int j1 = 0; j1 < n; ++j1) {
      g.nodes_.push_back({side * j1 / n, side * j2 / n});
      g.weights_(j1 + n * j2) = side * side / (n * n);
    }
  for (int k1 = -k_max; k1 <= k_max; ++k1)
    for (int k2 = -k_max; k2 <= k_max; ++k2) g.modes_.push_back({k1, k2});
  std::stable_sort(g.modes_.begin(), g.modes_.end(), [](const Mode& p, const Mode& q) {
    return std::make_tuple(p.a * p.a + p.b * p.b, p.a, p.b) <
           std::make_tuple(q.a * q.a + q.b * q.b, q.a, q.b);
  });
  const Scalar scale = (2 * pi / side) * (2 * pi / side);
  g.eigenvalues_.resize(static_cast<Eigen::Index>(g.modes_.size()));
  for (std::size_t i = 0; i < g.modes_.size(); ++i)
    g.eigenvalues_(static_cast<Eigen::Index>(i)) =
        Scalar(g.modes_[i].a * g.modes_[i].a + g.modes_[i].b * g.modes_[i].b) * scale;
  g.finish();
  return g;
}

template <typename Scalar>
void FactorGrid<Scalar>::finish() {
  const Eigen::Index nn = node_count(), nm = mode_count();
  synthesis_.resize(nn, nm);
  for (Eigen::Index j = 0; j < nm; ++j)
    for (Eigen::Index i = 0; i < nn; ++i)
      synthesis_(i, j) = evaluate_mode(j, nodes_[static_cast<std::size_t>(i)]);
  mode_norms_ = (synthesis_.array().square().colwise() * weights_.array()).colwise().sum().transpose();
  analysis_ = (synthesis_.transpose() * weights_.asDiagonal());
  analysis_.array().colwise() /= mode_norms_.array();
}

/// Tensor product of two factor grids.  Node (i, j) of the factors maps to
/// flat index i + N1 * j; fields are column-major (N1 x N2) matrices of
/// node values, coefficients (M1 x M2) matrices over mode pairs.
template <typename Scalar>
class ProductGrid {
 public:
  ProductGrid(FactorGrid<Scalar> first, FactorGrid<Scalar> second)
      : first_(std::move(first)), second_(std::move(second)) {
    weights_ = first_.weights() * second_.weights().transpose();
    lambda_ = first_.eigenvalues().replicate(1, second_.mode_count());
    mu_ = second_.eigenvalues().transpose().replicate(first_.mode_count(), 1);
  }

  const FactorGrid<Scalar>& first() const { return first_; }
  const FactorGrid<Scalar>& second() const { return second_; }
  Eigen::Index node_count() const { return first_.node_count() * second_.node_count(); }
  Eigen::Index mode_count() const { return first_.mode_count() * second_.mode_count(); }
  Scalar volume() const { return first_.volume() * second_.volume(); }
  /// Tensor-product weights, (N1 x N2).
  const Mat<Scalar>& weights() const { return weights_; }
  /// First-factor eigenvalue of each mode pair, (M1 x M2).
  const Mat<Scalar>& lambda() const { return lambda_; }
  /// Second-factor eigenvalue of each mode pair, (M1 x M2).
  const Mat<Scalar>& mu() const { return mu_; }

  std::pair<Eigen::Index, Eigen::Index> split(Eigen::Index node) const {
    return {node % first_.node_count(), node / first_.node_count()};
  }

  Scalar distance(Eigen::Index p, Eigen::Index q) const {
    const auto [p1, p2] = split(p);
    const auto [q1, q2] = split(q);
    const Scalar d1 = first_.distance(first_.nodes()[p1], first_.nodes()[q1]);
    const Scalar d2 = second_.distance(second_.nodes()[p2], second_.nodes()[q2]);
    return std::sqrt(d1 * d1 + d2 * d2);
  }

  std::string summary() const {
    return std::string(to_string(first_.kind())) + "(" + std::to_string(first_.resolution()) + ") x " +
           to_string(second_.kind()) + "(" + std::to_string(second_.resolution()) + "), " +
           std::to_string(node_count()) + " nodes, " + std::to_string(mode_count()) + " modes";
  }

  template <typename Derived>
  Mat<Scalar> analyze_matrix(const Eigen::MatrixBase<Derived>& values) const {
    Mat<Scalar> tmp;
    tmp.noalias() = first_.analysis() * values;
    Mat<Scalar> out;
    out.noalias() = tmp * second_.analysis().transpose();
    return out;
  }

  template <typename Derived>
  Mat<Scalar> synthesize_matrix(const Eigen::MatrixBase<Derived>& coefficients) const {
    Mat<Scalar> tmp;
    tmp.noalias() = coefficients * second_.synthesis().transpose();
    Mat<Scalar> out;
    out.noalias() = first_.synthesis() * tmp;
    return out;
  }

 private:
  FactorGrid<Scalar> first_;
  FactorGrid<Scalar> second_;
  Mat<Scalar> weights_;
  Mat<Scalar> lambda_;
  Mat<Scalar> mu_;
};

template <typename Scalar>
using GridPtr = std::shared_ptr<const ProductGrid<Scalar>>;

template <typename Scalar>
GridPtr<Scalar> make_product_grid(FactorGrid<Scalar> first, FactorGrid<Scalar> second) {
  return std::make_shared<const ProductGrid<Scalar>>(std::move(first), std::move(second));
}

/// Coefficients over product modes, (M1 x M2).
template <typename Scalar>
struct Coefficients {
  GridPtr<Scalar> grid;
  Mat<Scalar> values;
};

/// A real function on a product grid, stored as node values.  Spectral
/// coefficients are a lazily computed cache dropped on any mutable access.
template <typename Scalar>
class ScalarField {
 public:
  explicit ScalarField(GridPtr<Scalar> grid)
      : grid_(std::move(grid)), values_(Vec<Scalar>::Zero(grid_->node_count())) {}
  ScalarField(GridPtr<Scalar> grid, Vec<Scalar> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->node_count()) throw GridMismatch();
  }

  static ScalarField constant(GridPtr<Scalar> grid, Scalar c) {
    const Eigen::Index n = grid->node_count();
    return ScalarField(std::move(grid), Vec<Scalar>::Constant(n, c));
  }

  const ProductGrid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Vec<Scalar>& values() const { return values_; }
  Vec<Scalar>& mutable_values() {
    cache_.reset();
    return values_;
  }
  /// Node values viewed as the (N1 x N2) matrix.
  Eigen::Map<const Mat<Scalar>> matrix() const {
    return {values_.data(), grid_->first().node_count(), grid_->second().node_count()};
  }

  const Mat<Scalar>& coefficients() const {
    if (!cache_) cache_ = grid_->analyze_matrix(matrix());
    return *cache_;
  }
  bool has_cached_coefficients() const { return cache_.has_value(); }

  bool same_grid(const ScalarField& other) const { return grid_ == other.grid_; }

 private:
  GridPtr<Scalar> grid_;
  Vec<Scalar> values_;
  mutable std::optional<Mat<Scalar>> cache_;
};

template <typename Scalar>
void require_same_grid(const ScalarField<Scalar>& f, const ScalarField<Scalar>& g) {
  if (!f.same_grid(g)) throw GridMismatch();
}

template <typename Scalar>
Coefficients<Scalar> analyze(const ScalarField<Scalar>& field) {
  return {field.grid_ptr(), field.coefficients()};
}

template <typename Scalar>
ScalarField<Scalar> synthesize(const Coefficients<Scalar>& coefficients) {
  const auto& grid = *coefficients.grid;
  if (coefficients.values.rows() != grid.first().mode_count() ||
      coefficients.values.cols() != grid.second().mode_count())
    throw GridMismatch();
  Mat<Scalar> nodes = grid.synthesize_matrix(coefficients.values);
  return ScalarField<Scalar>(coefficients.grid, Eigen::Map<Vec<Scalar>>(nodes.data(), nodes.size()));
}

/// Single product mode e_{(i, j)} = (first mode i) x (second mode j).
template <typename Scalar>
ScalarField<Scalar> mode_field(const GridPtr<Scalar>& grid, Eigen::Index first_mode, Eigen::Index second_mode,
                               Scalar amplitude = 1) {
  Mat<Scalar> c = Mat<Scalar>::Zero(grid->first().mode_count(), grid->second().mode_count());
  c(first_mode, second_mode) = amplitude;
  return synthesize(Coefficients<Scalar>{grid, c});
}

/// Discrete integral: sum_i w_i f_i.
template <typename Scalar>
Scalar integrate(const ScalarField<Scalar>& field) {
  return (field.matrix().array() * field.grid().weights().array()).sum();
}

template <typename Scalar>
Scalar inner_product(const ScalarField<Scalar>& f, const ScalarField<Scalar>& g) {
  require_same_grid(f, g);
  return (f.matrix().array() * g.matrix().array() * f.grid().weights().array()).sum();
}

template <typename Scalar>
Scalar l2_norm(const ScalarField<Scalar>& f) {
  return std::sqrt(inner_product(f, f));
}

/// Point evaluation of the band-limited part of a field.
template <typename Scalar>
Scalar evaluate(const ScalarField<Scalar>& field, const std::array<Scalar, 2>& first_point,
                const std::array<Scalar, 2>& second_point) {
  const auto& g = field.grid();
  Vec<Scalar> e1(g.first().mode_count()), e2(g.second().mode_count());
  for (Eigen::Index i = 0; i < e1.size(); ++i) e1(i) = g.first().evaluate_mode(i, first_point);
  for (Eigen::Index j = 0; j < e2.size(); ++j) e2(j) = g.second().evaluate_mode(j, second_point);
  return e1.dot(field.coefficients() * e2);
}

/// Sup norm of a band-limited field: node values plus an oversampled
/// sweep of each factor (including the sphere poles and equator).
template <typename Scalar>
Scalar sup_norm(const ScalarField<Scalar>& field, int oversample = 2) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  const auto& g = field.grid();
  auto samples = [&](const FactorGrid<Scalar>& f) {
    std::vector<std::array<Scalar, 2>> pts = f.nodes();
    const int n = oversample * (2 * f.resolution() + 2);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        if (f.kind() == FactorKind::sphere)
          pts.push_back({pi * i / n, pi * j / n});
        else
          pts.push_back({f.size() * i / n, f.size() * j / (2 * n)});
      }
    Mat<Scalar> basis(static_cast<Eigen::Index>(pts.size()), f.mode_count());
    for (Eigen::Index r = 0; r < basis.rows(); ++r)
      for (Eigen::Index c = 0; c < basis.cols(); ++c) basis(r, c) = f.evaluate_mode(c, pts[static_cast<std::size_t>(r)]);
    return basis;
  };
  const Mat<Scalar> b1 = samples(g.first());
  const Mat<Scalar> b2 = samples(g.second());
  const Mat<Scalar> dense = b1 * field.coefficients() * b2.transpose();
  return std::max(dense.cwiseAbs().maxCoeff(), field.values().cwiseAbs().maxCoeff());
}

}  // namespace qflow

#endif  // QFLOW_SPECTRAL_GEOMETRY_HPP
