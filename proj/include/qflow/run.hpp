// Time loop: stepping, termination classification and diagnostic output.

#ifndef QFLOW_RUN_HPP
#define QFLOW_RUN_HPP

#include "qflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace qflow {

enum class Termination { running, converged, blowup, maxtime, error };

inline const char* to_string(Termination k) {
  switch (k) {
    case Termination::running: return "running";
    case Termination::converged: return "converged";
    case Termination::blowup: return "blowup";
    case Termination::maxtime: return "maxtime";
    case Termination::error: return "error";
  }
  return "?";
}

template <typename Scalar>
struct TerminationStatus {
  Termination kind = Termination::running;
  Scalar t_final = 0;
  std::string reason;
};

/// Per-step statistics gathered on every accepted step, not just at the
/// output cadence.
template <typename Scalar>
struct StepStats {
  long steps = 0;
  long rejected = 0;
  Scalar min_dt = std::numeric_limits<Scalar>::infinity();
  Scalar max_dt = 0;
  /// max |V(t) - V0| / V0 (before any renormalization).
  Scalar max_volume_drift = 0;
  /// max over steps of (II_{k+1} - II_k) / (1 + |II_k|).
  Scalar max_energy_increase = -std::numeric_limits<Scalar>::infinity();
  /// Steps where II_f rose by more than 1e-10 (1 + |II_f|).
  long energy_violations = 0;
  /// max over adaptive steps of the accepted error estimate.
  Scalar max_error_estimate = 0;
};

template <typename Scalar>
struct RunRecord {
  std::vector<DiagnosticRow<Scalar>> rows;
  TerminationStatus<Scalar> status;
  StepStats<Scalar> stats;
  Scalar volume0 = 0;
  Scalar final_rhs_norm = 0;
  /// Last valid state.
  std::optional<FlowState<Scalar>> final_state;
};

namespace detail {

inline std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace detail

/// Integrates until convergence, blow-up or t_end.  Deterministic for a
/// given configuration.
template <typename Scalar>
RunRecord<Scalar> run(const FlowConfig<Scalar>& cfg) {
  cfg.validate();
  const auto& bg = *cfg.background;
  const int n = bg.dimension();
  RunRecord<Scalar> rec;
  auto finish = [&](Termination kind, const FlowState<Scalar>& s, std::string why) {
    rec.status = {kind, s.t, std::move(why)};
  };

  FlowState<Scalar> state = initial_state(cfg);
  rec.volume0 = state.volume;
  Evaluation<Scalar> ev = evaluate(state, cfg);
  Scalar last_dt = 0;
  rec.rows.push_back(diagnostic_row(state, ev, cfg, last_dt));
  Scalar energy = rec.rows.back().functional;
  rec.final_state = state;
  rec.final_rhs_norm = rhs_norm(state, ev.rhs);
  if (rec.final_rhs_norm < cfg.conv_tol) {
    finish(Termination::converged, state, "initial state is stationary");
    return rec;
  }

  Scalar dt_next = cfg.dt_fixed ? Scalar(*cfg.dt_fixed) : stability_dt(state, cfg);
  bool row_pending = false;
  while (true) {
    if (state.t >= Scalar(cfg.t_end)) {
      finish(Termination::maxtime, state, "reached t_end");
      break;
    }
    if (rec.stats.steps >= cfg.max_steps) {
      finish(Termination::maxtime, state, "step budget exhausted");
      break;
    }
    const Scalar raw = stability_dt_raw(state, cfg);
    if (raw < Scalar(cfg.dt_min)) {
      finish(Termination::blowup, state, "step size collapse: stability dt " + detail::short_number(double(raw)) +
                         " < dt_min " + detail::short_number(cfg.dt_min));
      break;
    }
    const Scalar remaining = Scalar(cfg.t_end) - state.t;
    FlowState<Scalar> next = state;
    Scalar dt = 0;
    try {
      if (cfg.scheme == Scheme::adaptive) {
        dt = std::min({dt_next, raw, Scalar(cfg.dt_max)});
        while (true) {
          bool last = false;
          if (dt >= remaining) dt = remaining, last = true;
          auto attempt = step_dopri(state, dt, cfg, &ev.rhs);
          const Scalar factor =
              std::clamp(Scalar(0.9) * std::pow(std::max(attempt.error, Scalar(1e-10)), Scalar(-0.2)), Scalar(0.2),
                         Scalar(5));
          if (attempt.error <= 1) {
            next = std::move(attempt.state);
            if (last) next.t = Scalar(cfg.t_end);
            rec.stats.max_error_estimate = std::max(rec.stats.max_error_estimate, attempt.error);
            dt_next = dt * factor;
            break;
          }
          ++rec.stats.rejected;
          dt *= factor;
          if (dt < Scalar(cfg.dt_min)) break;
        }
        if (dt < Scalar(cfg.dt_min)) {
          finish(Termination::blowup, state, "adaptive step size collapse");
          break;
        }
      } else {
        dt = cfg.dt_fixed ? Scalar(*cfg.dt_fixed) : std::min(raw, Scalar(cfg.dt_max));
        const bool last = dt >= remaining;
        if (last) dt = remaining;
        next = cfg.scheme == Scheme::rk4 ? step_rk4(state, dt, cfg, &ev.rhs) : step_ifrk4(state, dt, cfg);
        if (last) next.t = Scalar(cfg.t_end);
      }
    } catch (const ExponentCapExceeded& e) {
      finish(Termination::blowup, state, e.what());
      break;
    } catch (const NonFiniteState& e) {
      finish(Termination::error, state, e.what());
      break;
    }

    ++rec.stats.steps;
    rec.stats.min_dt = std::min(rec.stats.min_dt, dt);
    rec.stats.max_dt = std::max(rec.stats.max_dt, dt);
    rec.stats.max_volume_drift =
        std::max(rec.stats.max_volume_drift, std::abs(next.volume - rec.volume0) / rec.volume0);
    if (cfg.renormalize) next = renormalize_volume(next, rec.volume0, n, cfg.exponent_cap);

    const Scalar peak = next.u.values().cwiseAbs().maxCoeff();
    if (peak > Scalar(cfg.u_max)) {
      finish(Termination::blowup, next, "max|u| exceeded " + detail::short_number(cfg.u_max));
      break;
    }
    std::optional<Evaluation<Scalar>> ev_next;
    try {
      ev_next.emplace(evaluate(next, cfg));
    } catch (const ExponentCapExceeded& e) {
      finish(Termination::blowup, state, e.what());
      break;
    }
    if (!ev_next->rhs.allFinite()) {
      finish(Termination::error, state, "non-finite right-hand side");
      break;
    }

    const Scalar energy_next = functional_II(next.u, ev_next->pu, ev_next->weighted_f, bg);
    const Scalar rise = (energy_next - energy) / (1 + std::abs(energy));
    rec.stats.max_energy_increase = std::max(rec.stats.max_energy_increase, rise);
    if (rise > Scalar(1e-10)) ++rec.stats.energy_violations;
    energy = energy_next;

    state = std::move(next);
    ev = std::move(*ev_next);
    last_dt = dt;
    rec.final_state = state;
    rec.final_rhs_norm = rhs_norm(state, ev.rhs);
    row_pending = true;
    if (rec.stats.steps % cfg.output_every == 0) {
      rec.rows.push_back(diagnostic_row(state, ev, cfg, last_dt));
      row_pending = false;
    }
    if (rec.final_rhs_norm < cfg.conv_tol) {
      finish(Termination::converged, state, "rhs norm below tolerance");
      break;
    }
  }
  if (row_pending) rec.rows.push_back(diagnostic_row(state, ev, cfg, last_dt));
  return rec;
}

}  // namespace qflow

#endif  // QFLOW_RUN_HPP
