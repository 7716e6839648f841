// Semi-discrete prescribed Q-curvature flow
//   du/dt = -1/2 e^{-nu} (P u + Q0) + 1/2 k_p f / int f e^{nu}
// and its explicit time integrators.

#ifndef QFLOW_FLOW_HPP
#define QFLOW_FLOW_HPP

#include "qflow/conformal_operator.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace qflow {

enum class Scheme { rk4, adaptive, ifrk4 };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::rk4: return "rk4";
    case Scheme::adaptive: return "adaptive";
    case Scheme::ifrk4: return "ifrk4";
  }
  return "?";
}

template <typename Scalar>
struct FlowConfig {
  FlowConfig(BackgroundPtr<Scalar> bg, ScalarField<Scalar> f_, ScalarField<Scalar> u0_)
      : background(std::move(bg)), f(std::move(f_)), u0(std::move(u0_)) {}

  BackgroundPtr<Scalar> background;
  ScalarField<Scalar> f;
  ScalarField<Scalar> u0;
  Scheme scheme = Scheme::rk4;
  /// When set, every rk4/ifrk4 step uses exactly this dt.
  std::optional<double> dt_fixed;
  double atol = 1e-10;
  double rtol = 1e-8;
  double dt_min = 1e-10;
  double dt_max = 1e-2;
  double c_stab = 1.0;
  double t_end = 10.0;
  /// Converged once ||du/dt||_{L2} / vol^{1/2} drops below this.
  double conv_tol = 1e-8;
  double u_max = 25.0;
  double exponent_cap = kDefaultExponentCap;
  bool renormalize = false;
  int output_every = 100;
  long max_steps = 20'000'000;

  int dimension() const { return background->dimension(); }

  void validate() const {
    if (!f.same_grid(background->q0()) || !u0.same_grid(background->q0())) throw GridMismatch();
    if (!(f.values().minCoeff() > 0)) throw std::invalid_argument("prescribed function f must be positive");
    if (!(atol > 0 && rtol > 0 && conv_tol > 0 && c_stab > 0 && u_max > 0))
      throw std::invalid_argument("tolerances must be positive");
    if (!(dt_min > 0 && dt_min < dt_max)) throw std::invalid_argument("need 0 < dt_min < dt_max");
    if (dt_fixed && !(*dt_fixed > 0)) throw std::invalid_argument("fixed dt must be positive");
    if (!(t_end >= 0)) throw std::invalid_argument("t_end must be nonnegative");
    if (output_every < 1) throw std::invalid_argument("output_every must be >= 1");
  }
};

template <typename Scalar>
struct FlowState {
  Scalar t = 0;
  ScalarField<Scalar> u;
  /// e^{nu} at the nodes.
  Vec<Scalar> weight;
  /// int e^{nu} dV0.
  Scalar volume = 0;
};

template <typename Scalar>
FlowState<Scalar> make_state(ScalarField<Scalar> u, Scalar t, int n, double exponent_cap = kDefaultExponentCap) {
  check_exponent(u, n, exponent_cap);
  Vec<Scalar> w = (Scalar(n) * u.values().array()).exp();
  const Scalar volume = (u.grid().weights().reshaped().array() * w.array()).sum();
  return {t, std::move(u), std::move(w), volume};
}

template <typename Scalar>
FlowState<Scalar> initial_state(const FlowConfig<Scalar>& cfg) {
  return make_state(cfg.u0, Scalar(0), cfg.dimension(), cfg.exponent_cap);
}

/// Everything the right-hand side needs at one state; reused by the
/// diagnostics so P u is applied once per accepted state.
template <typename Scalar>
struct Evaluation {
  ScalarField<Scalar> pu;
  Vec<Scalar> rhs;
  /// int f e^{nu} dV0.
  Scalar weighted_f = 0;
};

template <typename Scalar>
Evaluation<Scalar> evaluate(const FlowState<Scalar>& s, const FlowConfig<Scalar>& cfg) {
  const auto& bg = *cfg.background;
  require_same_grid(s.u, bg.q0());
  ScalarField<Scalar> pu = apply(bg.op(), s.u);
  const auto& w = s.u.grid().weights().reshaped();
  const Scalar wf = (w.array() * cfg.f.values().array() * s.weight.array()).sum();
  if (!(wf > 0)) throw std::logic_error("int f e^{nu} must be positive");
  Vec<Scalar> r = Scalar(-0.5) * (pu.values() + bg.q0().values()).array() / s.weight.array() +
                  Scalar(0.5) * bg.total_q() / wf * cfg.f.values().array();
  return {std::move(pu), std::move(r), wf};
}

template <typename Scalar>
ScalarField<Scalar> rhs(const FlowState<Scalar>& s, const FlowConfig<Scalar>& cfg) {
  return ScalarField<Scalar>(s.u.grid_ptr(), evaluate(s, cfg).rhs);
}

/// ||du/dt||_{L2} / vol^{1/2}.
template <typename Scalar>
Scalar rhs_norm(const FlowState<Scalar>& s, const Vec<Scalar>& r) {
  const auto& g = s.u.grid();
  return std::sqrt((g.weights().reshaped().array() * r.array().square()).sum() / g.volume());
}

/// Explicit step bound c_stab / (max e^{-nu} sigma_max), before clamping.
template <typename Scalar>
Scalar stability_dt_raw(const FlowState<Scalar>& s, const FlowConfig<Scalar>& cfg) {
  const Scalar sigma_max = cfg.background->op().max_symbol();
  if (cfg.scheme == Scheme::ifrk4) {
    const Scalar mean = s.weight.cwiseInverse().mean();
    const Scalar spread = (s.weight.cwiseInverse().array() - mean).abs().maxCoeff();
    if (spread * sigma_max <= 0) return std::numeric_limits<Scalar>::infinity();
    return Scalar(cfg.c_stab) / (spread * sigma_max);
  }
  return Scalar(cfg.c_stab) / (s.weight.cwiseInverse().maxCoeff() * sigma_max);
}

template <typename Scalar>
Scalar stability_dt(const FlowState<Scalar>& s, const FlowConfig<Scalar>& cfg) {
  return std::clamp(stability_dt_raw(s, cfg), Scalar(cfg.dt_min), Scalar(cfg.dt_max));
}

/// u <- u + (1/n) log(V0 / V), so that int e^{nu} = V0.
template <typename Scalar>
FlowState<Scalar> renormalize_volume(const FlowState<Scalar>& s, Scalar target, int n,
                                     double exponent_cap = kDefaultExponentCap) {
  if (!(s.volume > 0)) throw std::invalid_argument("volume must be positive");
  const Scalar shift = std::log(target / s.volume) / n;
  ScalarField<Scalar> u(s.u.grid_ptr(), s.u.values().array() + shift);
  return make_state(std::move(u), s.t, n, exponent_cap);
}

namespace detail {

template <typename Scalar>
Vec<Scalar> stage_rhs(const FlowState<Scalar>& base, const Vec<Scalar>& u, const FlowConfig<Scalar>& cfg) {
  return evaluate(make_state(ScalarField<Scalar>(base.u.grid_ptr(), u), base.t, cfg.dimension(), cfg.exponent_cap),
                  cfg)
      .rhs;
}

template <typename Scalar>
bool all_finite(const Vec<Scalar>& v) {
  return v.allFinite();
}

}  // namespace detail

class NonFiniteState : public std::runtime_error {
 public:
  NonFiniteState() : std::runtime_error("time step produced non-finite values") {}
};

/// One classical RK4 step.  `k1` may carry rhs(s) when already known.
template <typename Scalar>
FlowState<Scalar> step_rk4(const FlowState<Scalar>& s, Scalar dt, const FlowConfig<Scalar>& cfg,
                           const Vec<Scalar>* k1 = nullptr) {
  const Vec<Scalar>& u = s.u.values();
  const Vec<Scalar> r1 = k1 ? *k1 : evaluate(s, cfg).rhs;
  const Vec<Scalar> r2 = detail::stage_rhs(s, Vec<Scalar>(u + (dt / 2) * r1), cfg);
  const Vec<Scalar> r3 = detail::stage_rhs(s, Vec<Scalar>(u + (dt / 2) * r2), cfg);
  const Vec<Scalar> r4 = detail::stage_rhs(s, Vec<Scalar>(u + dt * r3), cfg);
  Vec<Scalar> next = u + (dt / 6) * (r1 + 2 * r2 + 2 * r3 + r4);
  if (!detail::all_finite(next)) throw NonFiniteState();
  return make_state(ScalarField<Scalar>(s.u.grid_ptr(), std::move(next)), s.t + dt, cfg.dimension(),
                    cfg.exponent_cap);
}

/// Integrating-factor (Lawson) RK4: the linear part -1/2 c P with c the
/// mean of e^{-nu} at the start of the step is propagated exactly in
/// spectral space; unresolved node content passes through unchanged.
template <typename Scalar>
FlowState<Scalar> step_ifrk4(const FlowState<Scalar>& s, Scalar dt, const FlowConfig<Scalar>& cfg) {
  const auto& op = cfg.background->op();
  const auto& grid = s.u.grid_ptr();
  const Scalar c = s.weight.cwiseInverse().mean();
  const Mat<Scalar> half = ((Scalar(-0.5) * c * dt / 2) * op.symbol().array()).exp().matrix() -
                           Mat<Scalar>::Ones(op.symbol().rows(), op.symbol().cols());
  const Mat<Scalar> full = ((Scalar(-0.5) * c * dt) * op.symbol().array()).exp().matrix() -
                           Mat<Scalar>::Ones(op.symbol().rows(), op.symbol().cols());
  auto propagate = [&](const Mat<Scalar>& m, const Vec<Scalar>& v) -> Vec<Scalar> {
    ScalarField<Scalar> f(grid, v);
    return v + spectral_multiply(m, f).values();
  };
  // N(u) = rhs(u) + 1/2 c P u
  auto nonlinear = [&](const Vec<Scalar>& v) -> Vec<Scalar> {
    const auto st = make_state(ScalarField<Scalar>(grid, v), s.t, cfg.dimension(), cfg.exponent_cap);
    const auto ev = evaluate(st, cfg);
    return ev.rhs + Scalar(0.5) * c * ev.pu.values();
  };
  const Vec<Scalar>& u = s.u.values();
  const Vec<Scalar> k1 = nonlinear(u);
  const Vec<Scalar> eh_u = propagate(half, u);
  const Vec<Scalar> k2 = nonlinear(propagate(half, Vec<Scalar>(u + (dt / 2) * k1)));
  const Vec<Scalar> k3 = nonlinear(Vec<Scalar>(eh_u + (dt / 2) * k2));
  const Vec<Scalar> k4 = nonlinear(Vec<Scalar>(propagate(full, u) + dt * propagate(half, k3)));
  Vec<Scalar> next = propagate(full, u) +
                     (dt / 6) * (propagate(full, k1) + 2 * propagate(half, Vec<Scalar>(k2 + k3)) + k4);
  if (!detail::all_finite(next)) throw NonFiniteState();
  return make_state(ScalarField<Scalar>(grid, std::move(next)), s.t + dt, cfg.dimension(), cfg.exponent_cap);
}

template <typename Scalar>
struct EmbeddedStep {
  FlowState<Scalar> state;
  /// Weighted RMS of the embedded error estimate; accept when <= 1.
  Scalar error = 0;
};

/// One Dormand-Prince 5(4) attempt with its embedded error estimate.
template <typename Scalar>
EmbeddedStep<Scalar> step_dopri(const FlowState<Scalar>& s, Scalar dt, const FlowConfig<Scalar>& cfg,
                                const Vec<Scalar>* k1 = nullptr) {
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double b5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
  static constexpr double b4[7] = {5179.0 / 57600, 0,       7571.0 / 16695, 393.0 / 640,
                                   -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
  const Vec<Scalar>& u = s.u.values();
  std::array<Vec<Scalar>, 7> k;
  k[0] = k1 ? *k1 : evaluate(s, cfg).rhs;
  for (int i = 1; i < 7; ++i) {
    Vec<Scalar> stage = u;
    for (int j = 0; j < i; ++j)
      if (a[i][j] != 0) stage += (dt * Scalar(a[i][j])) * k[j];
    k[i] = detail::stage_rhs(s, stage, cfg);
  }
  Vec<Scalar> next = u;
  Vec<Scalar> err = Vec<Scalar>::Zero(u.size());
  for (int i = 0; i < 7; ++i) {
    if (b5[i] != 0) next += (dt * Scalar(b5[i])) * k[i];
    err += (dt * Scalar(b5[i] - b4[i])) * k[i];
  }
  if (!detail::all_finite(next)) throw NonFiniteState();
  const Vec<Scalar> scale = Scalar(cfg.atol) + Scalar(cfg.rtol) * u.cwiseAbs().cwiseMax(next.cwiseAbs()).array();
  const Scalar e = std::sqrt((err.array() / scale.array()).square().mean());
  return {make_state(ScalarField<Scalar>(s.u.grid_ptr(), std::move(next)), s.t + dt, cfg.dimension(),
                     cfg.exponent_cap),
          e};
}

/// Fixed-size step with the configured scheme (adaptive uses its 5th-order
/// solution without rejection).
template <typename Scalar>
FlowState<Scalar> step(const FlowState<Scalar>& s, Scalar dt, const FlowConfig<Scalar>& cfg,
                       const Vec<Scalar>* k1 = nullptr) {
  if (!(dt > 0)) throw std::invalid_argument("step needs dt > 0");
  switch (cfg.scheme) {
    case Scheme::rk4: return step_rk4(s, dt, cfg, k1);
    case Scheme::ifrk4: return step_ifrk4(s, dt, cfg);
    case Scheme::adaptive: return step_dopri(s, dt, cfg, k1).state;
  }
  throw std::logic_error("unknown scheme");
}

/// Advance with RK4 from s to exactly t_target using steps of at most
/// fraction * stability_dt.
template <typename Scalar>
FlowState<Scalar> advance_to(FlowState<Scalar> s, Scalar t_target, const FlowConfig<Scalar>& cfg,
                             Scalar fraction = Scalar(0.25)) {
  FlowConfig<Scalar> rk = cfg;
  rk.scheme = Scheme::rk4;
  while (s.t < t_target) {
    Scalar dt = fraction * stability_dt_raw(s, rk);
    const Scalar remaining = t_target - s.t;
    if (dt >= remaining) dt = remaining;
    const Scalar t_next = s.t + dt;
    s = step_rk4(s, dt, rk);
    if (dt == remaining) s.t = t_target;
    else s.t = t_next;
  }
  return s;
}

}  // namespace qflow

#endif  // QFLOW_FLOW_HPP
