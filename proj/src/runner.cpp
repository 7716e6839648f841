#include "qflow/cli/runner.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>

#ifndef QFLOW_VERSION
#define QFLOW_VERSION "unknown"
#endif

namespace qflow::cli {

using nlohmann::json;

std::string version() { return QFLOW_VERSION; }

namespace {

Scheme to_scheme(const std::string& s) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "adaptive") return Scheme::adaptive;
  if (s == "ifrk4") return Scheme::ifrk4;
  throw ConfigError("unknown scheme '" + s + "'");
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no inf/nan; keep the file valid.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void put(std::string& line, double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  line.append(buf, ptr);
}

}  // namespace

Case build_case(const RunConfig& cfg) {
  cfg.validate();
  Grid grid = cfg.manifold == "s2xt2"
                  ? make_product_grid(FactorGrid<double>::sphere(cfg.l_max, cfg.radius),
                                      FactorGrid<double>::torus(cfg.k_max, cfg.side))
                  : make_product_grid(FactorGrid<double>::torus(cfg.k_max, cfg.side),
                                      FactorGrid<double>::torus(cfg.k_max, cfg.side));
  OperatorPtr<double> op = cfg.op == "model" ? model_s2xt2_operator(grid) : flat_t4_operator(grid);
  auto bg = make_background(op, parse_field(cfg.q0, grid, cfg.seed), kDimension, cfg.q0);
  Field f = parse_field(cfg.f, grid, cfg.seed);
  if (!(f.values().minCoeff() > 0)) throw ConfigError("f must be positive at every node");
  FlowConfig<double> flow(bg, std::move(f), parse_field(cfg.u0, grid, cfg.seed));
  flow.scheme = to_scheme(cfg.scheme);
  flow.dt_fixed = cfg.dt;
  flow.atol = cfg.atol;
  flow.rtol = cfg.rtol;
  flow.dt_min = cfg.dt_min;
  flow.dt_max = cfg.dt_max;
  flow.c_stab = cfg.c_stab;
  flow.t_end = cfg.t_end;
  flow.conv_tol = cfg.conv_tol;
  flow.u_max = cfg.u_max;
  flow.exponent_cap = cfg.exponent_cap;
  flow.renormalize = cfg.renormalize;
  flow.output_every = cfg.output_every;
  flow.max_steps = cfg.max_steps;
  flow.validate();
  return {cfg, std::move(grid), std::move(bg), std::move(flow)};
}

std::optional<BlowupCertificate<double>> best_blowup_certificate(const ScalarField<double>& u0,
                                                                 const ConformalBackground<double>& bg,
                                                                 std::string& note) {
  note.clear();
  if (!(bg.total_q() > 0) || !bg.has_decomposition()) {
    note = "k_p <= 0: no blow-up bound applies";
    return std::nullopt;
  }
  std::optional<BlowupCertificate<double>> best;
  const auto& phis = bg.nq_fields();
  for (std::size_t j = 0; j < phis.size(); ++j) {
    try {
      auto c = blowup_bound(u0, phis[j], bg, bg.nq_labels()[j]);
      if (!best || c.t_bound_proof < best->t_bound_proof) best = std::move(c);
    } catch (const HypothesisFailure&) {
    }
  }
  if (!best) note = "every kernel moment of u0 vanishes; perturb_initial gives admissible data";
  return best;
}

CaseRecord run_case(const RunConfig& cfg) {
  const Case c = build_case(cfg);
  const auto& bg = *c.background;
  CaseRecord rec;
  rec.config = cfg;
  rec.grid = c.grid;
  rec.grid_summary = c.grid->summary();
  rec.k_p = bg.total_q();
  rec.nu = bg.nu();
  rec.lambda1 = bg.op().first_positive();
  rec.sigma_max = bg.op().max_symbol();
  rec.phi_ids = bg.nq_labels();

  if (bg.nu() >= 1 && bg.nu() <= 8 && bg.has_decomposition()) rec.hypothesis = check_sign_condition(bg.nq_fields());
  const bool f_constant = is_constant(c.flow.f);
  if (f_constant) {
    rec.blowup = best_blowup_certificate(c.flow.u0, bg, rec.blowup_note);
  } else if (bg.total_q() > 0) {
    rec.blowup_note = "blow-up bound is derived for constant f";
  }

  rec.run = run(c.flow);
  const auto& rows = rec.run.rows;

  if (f_constant && bg.has_decomposition()) {
    const double rate = moment_growth_rate(bg, rec.run.volume0);
    for (int j = 0; j < bg.nu(); ++j) {
      const double m0 = rows.front().moments(j);
      const double sup = sup_norm(bg.nq_fields()[static_cast<std::size_t>(j)]);
      if (!(std::abs(m0) > 1e-12 * sup * rec.run.volume0)) continue;
      MomentLaw law;
      law.phi_id = bg.nq_labels()[static_cast<std::size_t>(j)];
      law.m0 = m0;
      law.rate_theory = rate;
      std::vector<double> t, m;
      for (const auto& r : rows) {
        const double predicted = moment_law_prediction(r.t, m0, bg, rec.run.volume0);
        law.max_rel_error = std::max(law.max_rel_error, std::abs(r.moments(j) - predicted) / std::abs(m0));
        t.push_back(r.t);
        m.push_back(r.moments(j));
      }
      law.rate_fit = rows.size() >= 2 ? log_slope(t, m) : std::numeric_limits<double>::quiet_NaN();
      rec.moment_laws.push_back(std::move(law));
    }
  }
  if (rec.blowup) {
    if (rec.run.status.kind == Termination::blowup) rec.blowup->t_observed = rec.run.status.t_final;
    for (const auto& law : rec.moment_laws)
      if (law.phi_id == rec.blowup->phi_id) rec.blowup->rate_fit = law.rate_fit;
  }
  if (rec.run.final_state) rec.final_residual = residual(rec.run.final_state->u, c.flow).norm;
  rec.monitors = apriori_monitors(rows, rec.k_p);
  return rec;
}

int CaseRecord::exit_code() const {
  switch (run.status.kind) {
    case Termination::converged:
    case Termination::maxtime: return 0;
    case Termination::blowup:
      if (blowup) return blowup->t_observed && *blowup->t_observed <= blowup->t_bound_proof ? 0 : 3;
      return k_p > 0 ? 0 : 3;
    default: return 2;
  }
}

std::string series_header(int nu) {
  std::string h = "t,volume,II_f,dirichlet,a0";
  for (int j = 1; j <= nu; ++j) h += ",a" + std::to_string(j);
  h += ",sum_abs_a";
  for (int j = 1; j <= nu; ++j) h += ",m_phi_" + std::to_string(j);
  h += ",residual,min_u,max_u,dt";
  return h;
}

void write_series(std::ostream& os, const std::vector<DiagnosticRow<double>>& rows, int nu) {
  os << series_header(nu) << '\n';
  std::string line;
  for (const auto& r : rows) {
    line.clear();
    auto field = [&](double v) {
      if (!line.empty()) line += ',';
      put(line, v);
    };
    field(r.t);
    field(r.volume);
    field(r.functional);
    field(r.dirichlet);
    field(r.a0);
    for (int j = 0; j < nu; ++j) field(r.a(j));
    field(r.sum_abs_a);
    for (int j = 0; j < nu; ++j) field(r.moments(j));
    field(r.residual);
    field(r.min_u);
    field(r.max_u);
    field(r.dt);
    os << line << '\n';
  }
}

json to_json(const SignPatternReport<double>& rep, const ProductGrid<double>& grid) {
  json patterns = json::array();
  for (const auto& p : rep.patterns) {
    json item{{"signs", p.signs}, {"realized", p.realized}};
    if (p.realized) {
      const auto [i1, i2] = grid.split(p.witness.node);
      const auto& x1 = grid.first().nodes()[static_cast<std::size_t>(i1)];
      const auto& x2 = grid.second().nodes()[static_cast<std::size_t>(i2)];
      item["witness_node"] = p.witness.node;
      item["witness_coordinates"] = {x1[0], x1[1], x2[0], x2[1]};
      item["margin"] = p.witness.margin;
      item["radius"] = p.witness.radius;
    }
    patterns.push_back(std::move(item));
  }
  return {{"nu", rep.nu},
          {"patterns", std::move(patterns)},
          {"C", rep.c},
          {"r0", rep.r0},
          {"verdict", rep.verdict},
          {"missing", rep.missing},
          {"resolution", {rep.first_resolution, rep.second_resolution}}};
}

json to_json(const BlowupCertificate<double>& c) {
  return {{"phi_id", c.phi_id},
          {"sup_phi", c.sup_phi},
          {"V0", c.volume0},
          {"m0", c.m0},
          {"T_bound_proof", c.t_bound_proof},
          {"T_bound_theorem", c.t_bound_theorem},
          {"T_observed", number_or_null(c.t_observed)},
          {"rate_fit", number_or_null(c.rate_fit)},
          {"rate_theory", c.rate_theory}};
}

json manifest_json(const CaseRecord& rec) {
  json config = json::object();
  for (const auto& [k, v] : rec.config.echo()) config[k] = v;
  const auto& s = rec.run.stats;
  return {{"code_version", version()},
          {"config", std::move(config)},
          {"grid", rec.grid_summary},
          {"dimension", kDimension},
          {"k_p", rec.k_p},
          {"nu", rec.nu},
          {"lambda1", rec.lambda1},
          {"sigma_max", rec.sigma_max},
          {"phi_ids", rec.phi_ids},
          {"V0", rec.run.volume0},
          {"steps", s.steps},
          {"rejected_steps", s.rejected},
          {"dt_min_used", finite_or_null(s.min_dt)},
          {"dt_max_used", s.max_dt},
          {"outputs", {"series.csv", "certificates.json", "manifest.json"}}};
}

json certificates_json(const CaseRecord& rec) {
  const auto& st = rec.run.status;
  const auto& s = rec.run.stats;
  json laws = json::array();
  for (const auto& l : rec.moment_laws)
    laws.push_back({{"phi_id", l.phi_id},
                    {"m0", l.m0},
                    {"max_rel_error", l.max_rel_error},
                    {"rate_fit", finite_or_null(l.rate_fit)},
                    {"rate_theory", l.rate_theory}});
  json monitors = nullptr;
  if (rec.monitors.applicable)
    monitors = {{"dirichlet_max", rec.monitors.dirichlet_max},
                {"dirichlet_first_quarter", rec.monitors.dirichlet_quarter},
                {"abs_a0_max", rec.monitors.a0_max},
                {"abs_a0_first_quarter", rec.monitors.a0_quarter},
                {"sum_abs_a_max", rec.monitors.sum_a_max},
                {"sum_abs_a_first_quarter", rec.monitors.sum_a_quarter},
                {"flagged", rec.monitors.any()}};
  return {{"termination", {{"kind", to_string(st.kind)}, {"t_final", st.t_final}, {"reason", st.reason}}},
          {"exit_code", rec.exit_code()},
          {"blowup", rec.blowup ? to_json(*rec.blowup) : json(nullptr)},
          {"blowup_note", rec.blowup_note},
          {"moment_law", std::move(laws)},
          {"convergence",
           {{"residual", rec.final_residual},
            {"rhs_norm", rec.run.final_rhs_norm},
            {"tolerance", rec.config.conv_tol},
            {"converged", st.kind == Termination::converged},
            {"monitors", std::move(monitors)}}},
          {"conservation",
           {{"max_volume_drift", s.max_volume_drift},
            {"max_energy_increase", finite_or_null(s.max_energy_increase)},
            {"energy_violations", s.energy_violations}}},
          {"hypothesis", rec.hypothesis ? to_json(*rec.hypothesis, *rec.grid) : json(nullptr)}};
}

void write_outputs(const CaseRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  std::string failures;
  auto write = [&](const std::string& name, auto&& body) {
    const fs::path p = fs::path(dir) / name;
    std::ofstream os(p, std::ios::binary);
    if (os) body(os);
    os.flush();
    if (!os) failures += (failures.empty() ? "" : "; ") + std::string("failed to write ") + p.string();
  };
  write("series.csv", [&](std::ostream& os) { write_series(os, rec.run.rows, rec.nu); });
  write("certificates.json", [&](std::ostream& os) { os << certificates_json(rec).dump(2) << '\n'; });
  write("manifest.json", [&](std::ostream& os) { os << manifest_json(rec).dump(2) << '\n'; });
  if (!failures.empty()) throw std::runtime_error(failures);
}

}  // namespace qflow::cli
