// qflow: command-line driver for prescribed Q-curvature flow runs.

#include "qflow/cli/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace qflow;
using namespace qflow::cli;

struct Common {
  std::string config_path;
  std::string case_name;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::string renormalize;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value run configuration file")->check(CLI::ExistingFile);
  app->add_option("--case", c.case_name, "built-in preset (caseA, caseB, caseB0, caseT4)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "seed for random initial data");
  app->add_option("--dt", c.dt, "fixed time step")->check(CLI::PositiveNumber);
  app->add_option("--t-end", c.t_end, "final time")->check(CLI::PositiveNumber);
  app->add_option("--renormalize", c.renormalize, "volume renormalization")->check(CLI::IsMember({"on", "off"}));
}

RunConfig load(const Common& c) {
  if (c.config_path.empty() && c.case_name.empty()) throw ConfigError("give --config PATH or --case NAME");
  RunConfig cfg;
  if (!c.config_path.empty()) {
    cfg = parse_config(c.config_path);
    if (!c.case_name.empty() && c.case_name != cfg.case_name)
      throw ConfigError("--case " + c.case_name + " conflicts with case = " + cfg.case_name + " in the config file");
  } else {
    cfg = preset(c.case_name);
  }
  const std::string where = "command line";
  if (!c.out.empty()) set_key(cfg, "out", c.out, where);
  if (c.seed) set_key(cfg, "seed", std::to_string(*c.seed), where);
  if (c.dt) cfg.dt = *c.dt;
  if (c.t_end) cfg.t_end = *c.t_end;
  if (!c.renormalize.empty()) set_key(cfg, "renormalize", c.renormalize, where);
  cfg.validate();
  return cfg;
}

void write_json(const nlohmann::json& j, const std::string& dir, const std::string& name) {
  std::cout << j.dump(2) << '\n';
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream os(std::filesystem::path(dir) / name);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed to write " + (std::filesystem::path(dir) / name).string());
}

int cmd_run(const Common& common) {
  const RunConfig cfg = load(common);
  CaseRecord rec = run_case(cfg);
  write_outputs(rec, cfg.out);
  const auto& st = rec.run.status;
  std::printf("%s: %s at t = %.6g after %ld steps (%s)\n", cfg.case_name.c_str(), to_string(st.kind),
              static_cast<double>(st.t_final), rec.run.stats.steps, st.reason.c_str());
  if (rec.blowup)
    std::printf("blow-up bound (proof) %.6g, observed %s\n", rec.blowup->t_bound_proof,
                rec.blowup->t_observed ? std::to_string(*rec.blowup->t_observed).c_str() : "none");
  std::printf("outputs in %s\n", cfg.out.c_str());
  return rec.exit_code();
}

std::vector<ScalarField<double>> basis_from(const std::vector<std::string>& specs, const Case& c) {
  if (specs.empty()) return c.background->nq_fields();
  std::vector<ScalarField<double>> basis;
  for (const auto& s : specs) basis.push_back(parse_field(s, c.grid, c.config.seed));
  return basis;
}

int cmd_check(const Common& common, const std::vector<std::string>& specs) {
  const Case c = build_case(load(common));
  const auto basis = basis_from(specs, c);
  if (basis.empty()) throw std::runtime_error("N(Q) is trivial for this case; pass --phi specs");
  const auto rep = check_sign_condition(basis);
  write_json(to_json(rep, *c.grid), common.out, "hypothesis.json");
  return rep.verdict ? 0 : 1;
}

int cmd_certify(const Common& common, const std::string& u0_spec, const std::string& phi_spec) {
  const Case c = build_case(load(common));
  const ScalarField<double> u0 = u0_spec.empty() ? c.flow.u0 : parse_field(u0_spec, c.grid, c.config.seed);
  std::optional<BlowupCertificate<double>> cert;
  std::string note;
  try {
    if (phi_spec.empty())
      cert = best_blowup_certificate(u0, *c.background, note);
    else
      cert = blowup_bound(u0, parse_field(phi_spec, c.grid, c.config.seed), *c.background, phi_spec);
  } catch (const HypothesisFailure& e) {
    note = e.what();
  }
  if (!cert) {
    std::cerr << "no certificate: " << note << '\n';
    return 1;
  }
  write_json(to_json(*cert), common.out, "certificate.json");
  return 0;
}

int cmd_sweep(const Common& common, std::vector<double> dts, std::vector<int> l_max, std::vector<int> k_max) {
  const RunConfig base = load(common);
  if (dts.empty()) dts.push_back(base.dt.value_or(0));
  if (l_max.empty()) l_max.push_back(base.l_max);
  if (k_max.empty()) k_max.push_back(base.k_max);
  std::filesystem::create_directories(base.out);
  std::ofstream table(std::filesystem::path(base.out) / "sweep.csv", std::ios::binary);
  table << "l_max,k_max,dt,status,t_final,steps,residual,max_volume_drift,exit_code\n";
  table.precision(17);
  int worst = 0;
  for (int l : l_max)
    for (int k : k_max)
      for (double dt : dts) {
        RunConfig cfg = base;
        cfg.l_max = l;
        cfg.k_max = k;
        cfg.dt = dt > 0 ? std::optional<double>(dt) : std::nullopt;
        char tag[96];
        std::snprintf(tag, sizeof tag, "L%d_K%d_dt%.3g", l, k, dt);
        cfg.out = (std::filesystem::path(base.out) / tag).string();
        cfg.validate();
        CaseRecord rec = run_case(cfg);
        write_outputs(rec, cfg.out);
        worst = std::max(worst, rec.exit_code());
        table << l << ',' << k << ',' << dt << ',' << to_string(rec.run.status.kind) << ',' << rec.run.status.t_final
              << ',' << rec.run.stats.steps << ',' << rec.final_residual << ',' << rec.run.stats.max_volume_drift << ','
              << rec.exit_code() << '\n';
        std::printf("%s: %s\n", tag, to_string(rec.run.status.kind));
      }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prescribed Q-curvature flow on model product manifolds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  Common run_opts, check_opts, cert_opts, sweep_opts;
  auto* run_cmd = app.add_subcommand("run", "integrate a case and write series, certificates and manifest");
  add_common(run_cmd, run_opts);

  std::vector<std::string> phis;
  auto* check_cmd = app.add_subcommand("check-hypothesis", "sign-pattern report for an N(Q) basis");
  add_common(check_cmd, check_opts);
  check_cmd->add_option("--phi", phis, "basis field spec (repeatable); default: the case's N(Q) basis");

  std::string u0_spec, phi_spec;
  auto* cert_cmd = app.add_subcommand("certify-blowup", "blow-up time bound for initial data");
  add_common(cert_cmd, cert_opts);
  cert_cmd->add_option("--u0", u0_spec, "initial data spec; default: the case's u0");
  cert_cmd->add_option("--phi", phi_spec, "kernel function spec; default: best N(Q) basis function");

  std::vector<double> dts;
  std::vector<int> l_max, k_max;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a case over a grid of dt and resolutions");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--dts", dts, "time steps (0 = stability-limited)")->delimiter(',');
  sweep_cmd->add_option("--l-max", l_max, "sphere resolutions")->delimiter(',');
  sweep_cmd->add_option("--k-max", k_max, "torus resolutions")->delimiter(',');

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*check_cmd) return cmd_check(check_opts, phis);
    if (*cert_cmd) return cmd_certify(cert_opts, u0_spec, phi_spec);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, dts, l_max, k_max);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
