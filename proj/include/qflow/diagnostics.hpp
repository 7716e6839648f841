// Lyapunov functional, conserved and monotone quantities, kernel moments
// and the finite-time blow-up certificate.

#ifndef QFLOW_DIAGNOSTICS_HPP
#define QFLOW_DIAGNOSTICS_HPP

#include "qflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace qflow {

/// II_f(u) = n/2 <P u, u> + n <Q0, u> - k_p log(int f e^{nu}).
template <typename Scalar>
Scalar functional_II(const ScalarField<Scalar>& u, const ScalarField<Scalar>& pu, Scalar weighted_f,
                     const ConformalBackground<Scalar>& bg) {
  const Scalar n = bg.dimension();
  return n / 2 * inner_product(pu, u) + n * inner_product(bg.q0(), u) - bg.total_q() * std::log(weighted_f);
}

template <typename Scalar>
Scalar functional_II(const ScalarField<Scalar>& u, const FlowConfig<Scalar>& cfg) {
  const auto& bg = *cfg.background;
  check_exponent(u, bg.dimension(), cfg.exponent_cap);
  const Scalar wf = integrate(ScalarField<Scalar>(
      u.grid_ptr(), (cfg.f.values().array() * (Scalar(bg.dimension()) * u.values().array()).exp()).matrix()));
  if (!(wf > 0)) throw std::logic_error("int f e^{nu} must be positive");
  return functional_II(u, apply(bg.op(), u), wf, bg);
}

/// m_phi(u) = int phi e^{nu} dV0.
template <typename Scalar>
Scalar moment(const ScalarField<Scalar>& u, const ScalarField<Scalar>& phi, int n) {
  require_same_grid(u, phi);
  return (u.grid().weights().reshaped().array() * phi.values().array() * (Scalar(n) * u.values().array()).exp())
      .sum();
}

template <typename Scalar>
Scalar moment(const ScalarField<Scalar>& u, const ScalarField<Scalar>& phi, const ConformalBackground<Scalar>& bg) {
  return moment(u, phi, bg.dimension());
}

/// Closed-form kernel-moment law for f = 1: m(t) = m0 exp(n k_p t / (2 V0)).
template <typename Scalar>
Scalar moment_growth_rate(const ConformalBackground<Scalar>& bg, Scalar volume0) {
  return bg.dimension() * bg.total_q() / (2 * volume0);
}

template <typename Scalar>
Scalar moment_law_prediction(Scalar t, Scalar m0, const ConformalBackground<Scalar>& bg, Scalar volume0) {
  return m0 * std::exp(moment_growth_rate(bg, volume0) * t);
}

template <typename Scalar>
bool is_constant(const ScalarField<Scalar>& f) {
  const Scalar hi = f.values().maxCoeff(), lo = f.values().minCoeff();
  return hi - lo <= Scalar(1e-14) * std::max(std::abs(hi), std::abs(lo));
}

/// As above, refusing configurations whose f is not constant.
template <typename Scalar>
Scalar moment_law_prediction(Scalar t, Scalar m0, const FlowConfig<Scalar>& cfg, Scalar volume0) {
  if (!is_constant(cfg.f)) throw std::domain_error("moment law holds only for constant f");
  return moment_law_prediction(t, m0, *cfg.background, volume0);
}

template <typename Scalar>
struct Residual {
  ScalarField<Scalar> field;
  /// ||field||_{L2} / ||Q0||_{L2} (or / vol^{1/2} when Q0 = 0).
  Scalar norm;
};

template <typename Scalar>
Scalar residual_scale(const ConformalBackground<Scalar>& bg) {
  const Scalar q = l2_norm(bg.q0());
  return q > 0 ? q : std::sqrt(bg.grid().volume());
}

/// e^{-nu}(P u + Q0) - k_p f / int f e^{nu}, which equals -2 du/dt.
template <typename Scalar>
Residual<Scalar> residual(const ScalarField<Scalar>& u, const FlowConfig<Scalar>& cfg) {
  const auto st = make_state(u, Scalar(0), cfg.dimension(), cfg.exponent_cap);
  ScalarField<Scalar> field(u.grid_ptr(), Scalar(-2) * evaluate(st, cfg).rhs);
  const Scalar norm = l2_norm(field) / residual_scale(*cfg.background);
  return {std::move(field), norm};
}

template <typename Scalar>
struct DissipationCheck {
  /// Centered difference of II_f across the probe interval.
  Scalar lhs;
  /// -2n int e^{nu} |du/dt|^2 at the centre.
  Scalar rhs;
  Scalar gap;
  Scalar t_center;
};

/// Compares dII_f/dt against the dissipation identity at t = s.t + offset,
/// probing t +- probe along the trajectory started at s (offset >= probe;
/// defaults to probe).  The trajectory is integrated with RK4 at a quarter
/// of the stability step.
template <typename Scalar>
DissipationCheck<Scalar> dissipation_check(const FlowState<Scalar>& s, const FlowConfig<Scalar>& cfg, Scalar probe,
                                           std::type_identity_t<std::optional<Scalar>> offset = std::nullopt) {
  const Scalar centre_offset = offset.value_or(probe);
  if (!(probe > 0) || centre_offset < probe) throw std::invalid_argument("dissipation_check needs 0 < probe <= offset");
  const auto& bg = *cfg.background;
  const Scalar t_c = s.t + centre_offset;
  const auto before = advance_to(s, t_c - probe, cfg);
  const auto centre = advance_to(before, t_c, cfg);
  const auto after = advance_to(centre, t_c + probe, cfg);
  auto ii = [&](const FlowState<Scalar>& st) {
    const auto ev = evaluate(st, cfg);
    return functional_II(st.u, ev.pu, ev.weighted_f, bg);
  };
  const Scalar lhs = (ii(after) - ii(before)) / (2 * probe);
  const auto ev = evaluate(centre, cfg);
  const Scalar rhs = Scalar(-2 * bg.dimension()) *
                     (centre.u.grid().weights().reshaped().array() * centre.weight.array() * ev.rhs.array().square())
                         .sum();
  return {lhs, rhs, lhs - rhs, t_c};
}

template <typename Scalar>
struct DiagnosticRow {
  Scalar t = 0;
  Scalar volume = 0;
  Scalar functional = 0;
  Scalar dirichlet = 0;
  Scalar a0 = 0;
  Vec<Scalar> a;
  Scalar sum_abs_a = 0;
  Vec<Scalar> moments;
  Scalar residual = 0;
  Scalar min_u = 0;
  Scalar max_u = 0;
  Scalar dt = 0;
};

template <typename Scalar>
DiagnosticRow<Scalar> diagnostic_row(const FlowState<Scalar>& s, const Evaluation<Scalar>& ev,
                                     const FlowConfig<Scalar>& cfg, Scalar dt) {
  const auto& bg = *cfg.background;
  DiagnosticRow<Scalar> row;
  row.t = s.t;
  row.volume = s.volume;
  row.functional = functional_II(s.u, ev.pu, ev.weighted_f, bg);
  row.dirichlet = inner_product(ev.pu, s.u);
  const auto kc = project_kernel(s.u, bg);
  row.a0 = kc.a0;
  row.a = kc.a;
  row.sum_abs_a = kc.a.cwiseAbs().sum();
  row.moments.resize(bg.nu());
  for (int j = 0; j < bg.nu(); ++j)
    row.moments(j) = moment(s.u, bg.kernel_basis()[static_cast<std::size_t>(j + 1)], bg);
  row.residual = 2 * std::sqrt((s.u.grid().weights().reshaped().array() * ev.rhs.array().square()).sum()) /
                 residual_scale(bg);
  row.min_u = s.u.values().minCoeff();
  row.max_u = s.u.values().maxCoeff();
  row.dt = dt;
  return row;
}

/// Empirical boundedness of the a-priori quantities along a k_p < 0 run:
/// running maxima must stay within `factor` times their first-quarter maxima.
template <typename Scalar>
struct MonitorFlags {
  bool applicable = false;
  Scalar dirichlet_quarter = 0, dirichlet_max = 0;
  Scalar a0_quarter = 0, a0_max = 0;
  Scalar sum_a_quarter = 0, sum_a_max = 0;
  bool dirichlet_flag = false, a0_flag = false, sum_a_flag = false;
  bool any() const { return dirichlet_flag || a0_flag || sum_a_flag; }
};

template <typename Scalar>
MonitorFlags<Scalar> apriori_monitors(const std::vector<DiagnosticRow<Scalar>>& rows, Scalar k_p,
                                      Scalar factor = 10) {
  MonitorFlags<Scalar> m;
  if (!(k_p < 0) || rows.empty()) return m;
  m.applicable = true;
  const Scalar t0 = rows.front().t;
  const Scalar t_quarter = t0 + (rows.back().t - t0) / 4;
  for (const auto& r : rows) {
    const bool early = r.t <= t_quarter;
    const Scalar a0 = std::abs(r.a0);
    m.dirichlet_max = std::max(m.dirichlet_max, r.dirichlet);
    m.a0_max = std::max(m.a0_max, a0);
    m.sum_a_max = std::max(m.sum_a_max, r.sum_abs_a);
    if (early) {
      m.dirichlet_quarter = m.dirichlet_max;
      m.a0_quarter = m.a0_max;
      m.sum_a_quarter = m.sum_a_max;
    }
  }
  // absolute floor so exactly-zero quantities do not flag on rounding
  auto exceeds = [&](Scalar hi, Scalar quarter) { return hi > factor * quarter + Scalar(1e-12); };
  m.dirichlet_flag = exceeds(m.dirichlet_max, m.dirichlet_quarter);
  m.a0_flag = exceeds(m.a0_max, m.a0_quarter);
  m.sum_a_flag = exceeds(m.sum_a_max, m.sum_a_quarter);
  return m;
}

/// Least-squares slope of log|m| against t.
template <typename Scalar>
Scalar log_slope(const std::vector<Scalar>& t, const std::vector<Scalar>& m) {
  if (t.size() != m.size() || t.size() < 2) throw std::invalid_argument("log_slope needs >= 2 matching samples");
  const auto count = static_cast<Eigen::Index>(t.size());
  Mat<Scalar> design(count, 2);
  Vec<Scalar> y(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    design(i, 0) = 1;
    design(i, 1) = t[static_cast<std::size_t>(i)];
    y(i) = std::log(std::abs(m[static_cast<std::size_t>(i)]));
  }
  return design.colPivHouseholderQr().solve(y)(1);
}

template <typename Scalar>
struct BlowupCertificate {
  std::string phi_id;
  Scalar sup_phi = 0;
  Scalar volume0 = 0;
  Scalar m0 = 0;
  /// 2 V0 / (n k_p) log(sup|phi| V0 / |m0|).
  Scalar t_bound_proof = 0;
  /// 2 V0 / k_p log(sup|phi| V0 / |m0|), n times the above.
  Scalar t_bound_theorem = 0;
  std::optional<Scalar> t_observed;
  std::optional<Scalar> rate_fit;
  Scalar rate_theory = 0;
};

class HypothesisFailure : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Upper bound on the existence time for k_p > 0 and f = 1 from the
/// exponential moment law and |m_phi| <= sup|phi| V0.
template <typename Scalar>
BlowupCertificate<Scalar> blowup_bound(const ScalarField<Scalar>& u0, const ScalarField<Scalar>& phi,
                                       const ConformalBackground<Scalar>& bg, std::string phi_id = "phi") {
  if (!(bg.total_q() > 0)) throw HypothesisFailure("blow-up bound needs k_p > 0");
  check_exponent(u0, bg.dimension(), kDefaultExponentCap);
  BlowupCertificate<Scalar> c;
  c.phi_id = std::move(phi_id);
  c.sup_phi = sup_norm(phi);
  c.volume0 = integrate(ScalarField<Scalar>(u0.grid_ptr(), (Scalar(bg.dimension()) * u0.values().array()).exp()));
  c.m0 = moment(u0, phi, bg);
  if (!(std::abs(c.m0) > Scalar(1e-12) * c.sup_phi * c.volume0))
    throw HypothesisFailure("int phi e^{nu0} vanishes; perturb the initial data first");
  const Scalar log_term = std::log(c.sup_phi * c.volume0 / std::abs(c.m0));
  c.t_bound_theorem = 2 * c.volume0 / bg.total_q() * log_term;
  c.t_bound_proof = c.t_bound_theorem / bg.dimension();
  c.rate_theory = moment_growth_rate(bg, c.volume0);
  return c;
}

}  // namespace qflow

#endif  // QFLOW_DIAGNOSTICS_HPP
