#include "qflow/cli/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qflow;
using namespace qflow::cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qflow_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

/// Short, coarse run used by the plumbing tests.
RunConfig quick(const std::string& name) {
  RunConfig c = preset(name);
  c.l_max = 4;
  c.k_max = 2;
  c.max_steps = 40;
  c.output_every = 10;
  return c;
}

}  // namespace

TEST_CASE("presets") {
  const auto a = parse_config_text("case = caseA\n");
  CHECK(a.q0 == "const:-2");
  CHECK(a.f == "const:1");
  CHECK(a.l_max == 8);
  CHECK(a.k_max == 4);
  CHECK(preset("caseB").q0 == "const:2");
  CHECK(preset("caseT4").manifold == "t2xt2");
  try {
    preset("caseZ");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& name : preset_names()) CHECK(msg.find(name) != std::string::npos);
  }
}

TEST_CASE("config overrides, comments and echo") {
  const auto c = parse_config_text("# comment\nseed = 7   # trailing\n\ncase = caseB\nl_max = 6\nrenormalize = on\ndt = 1e-5\n");
  CHECK(c.case_name == "caseB");
  CHECK(c.seed == 7);
  CHECK(c.l_max == 6);
  CHECK(c.renormalize);
  REQUIRE(c.dt);
  CHECK(*c.dt == 1e-5);
  bool found = false;
  for (const auto& [k, v] : c.echo())
    if (k == "l_max") found = v == "6";
  CHECK(found);
}

TEST_CASE("config errors name the key and line") {
  auto message = [](const std::string& text) {
    try {
      parse_config_text(text, "run.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const auto bad_res = message("case = caseA\nl_max = eight\n");
  CHECK(bad_res.find("l_max") != std::string::npos);
  CHECK(bad_res.find("run.cfg:2") != std::string::npos);
  const auto range = message("case = caseA\n\nl_max = 2\n");
  CHECK(range.find("l_max") != std::string::npos);
  CHECK(range.find("run.cfg:3") != std::string::npos);
  CHECK(message("case = caseA\ncolour = red\n").find("unknown key 'colour'") != std::string::npos);
  CHECK(message("l_max = 8\n").find("missing required key 'case'") != std::string::npos);
  CHECK(message("case = caseA\njunk\n").find("run.cfg:2") != std::string::npos);
  CHECK(message("case = caseA\nseed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(message("case = custom\nq0 = const:-2\n").find("u0") != std::string::npos);
  CHECK(message("case = caseA\ndt_min = 1\ndt_max = 0.1\n").find("dt_min") != std::string::npos);
  CHECK(message("case = caseA\nscheme = euler\n").find("rk4") != std::string::npos);
  CHECK_THROWS_AS(parse_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("field specifications") {
  const auto g = make_product_grid(FactorGrid<double>::sphere(4, 1.0), FactorGrid<double>::torus(2, 6.283185307179586));
  const Field c = parse_field("const:1.5e+0", g, 0);
  CHECK((c.values().array() == 1.5).all());
  const Field z = parse_field("sph:1:0:2", g, 0);
  CHECK(z.values().maxCoeff() == doctest::Approx(2 * gauss_legendre<double>(5).first.maxCoeff()));
  const Field sum = parse_field("const:1 + torus:1:0:0.5", g, 0);
  CHECK(sum.values().maxCoeff() == doctest::Approx(1.5));
  const Field r1 = parse_field("random:0.3", g, 42), r2 = parse_field("random:0.3", g, 42);
  CHECK(r1.values() == r2.values());
  CHECK(sup_norm(r1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(std::abs(integrate(r1)) < 1e-12);
  CHECK(parse_field("random:0.3", g, 43).values() != r1.values());
  const Field b = parse_field("bump:1", g, 0);
  CHECK(b.values().minCoeff() >= 0);
  CHECK(b.values().maxCoeff() <= 1);
  CHECK_THROWS_AS(parse_field("sph:9:0:1", g, 0), ConfigError);
  CHECK_THROWS_AS(parse_field("sph:1:2:1", g, 0), ConfigError);
  CHECK_THROWS_AS(parse_field("t1:1:0:1", g, 0), ConfigError);
  CHECK_THROWS_AS(parse_field("wave:1", g, 0), ConfigError);
  CHECK_THROWS_AS(parse_field("const:abc", g, 0), ConfigError);
  CHECK_THROWS_AS(parse_field("", g, 0), ConfigError);
}

TEST_CASE("series schema") {
  CHECK(series_header(3) ==
        "t,volume,II_f,dirichlet,a0,a1,a2,a3,sum_abs_a,m_phi_1,m_phi_2,m_phi_3,residual,min_u,max_u,dt");
  std::ostringstream empty;
  write_series(empty, {}, 3);
  CHECK(empty.str() == series_header(3) + "\n");
  std::ostringstream none;
  write_series(none, {}, 0);
  CHECK(none.str() == "t,volume,II_f,dirichlet,a0,sum_abs_a,residual,min_u,max_u,dt\n");
}

TEST_CASE("run_case and outputs") {
  const auto rec = run_case(quick("caseB"));
  CHECK(rec.nu == 3);
  CHECK(rec.k_p == doctest::Approx(32 * std::pow(3.141592653589793, 3)).epsilon(1e-12));
  REQUIRE(rec.hypothesis);
  CHECK(rec.hypothesis->verdict);
  REQUIRE(rec.blowup);
  CHECK(rec.blowup->phi_id == "mode(1,0;0,0)");
  CHECK(rec.run.status.kind == Termination::maxtime);
  CHECK(rec.exit_code() == 0);

  const auto dir = scratch_dir("outputs");
  write_outputs(rec, dir.string());
  const auto csv = slurp(dir / "series.csv");
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  CHECK(header == series_header(3));
  int rows = 0;
  while (std::getline(lines, row)) {
    CHECK(std::count(row.begin(), row.end(), ',') == 15);
    ++rows;
  }
  CHECK(rows == 5);
  CHECK(csv.find('\r') == std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["k_p"].get<double>() == doctest::Approx(rec.k_p).epsilon(1e-12));
  CHECK(manifest["nu"] == 3);
  CHECK(manifest["lambda1"].get<double>() == doctest::Approx(3.0));
  CHECK(manifest["config"]["l_max"] == "4");
  CHECK(manifest["config"]["conv_tol"] == "1e-08");
  const auto cert = nlohmann::json::parse(slurp(dir / "certificates.json"));
  for (const char* key : {"phi_id", "sup_phi", "V0", "m0", "T_bound_proof", "T_bound_theorem", "T_observed",
                          "rate_fit", "rate_theory"})
    CHECK(cert["blowup"].contains(key));
  CHECK(cert["hypothesis"]["verdict"] == true);
  CHECK(cert["termination"]["kind"] == "maxtime");
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs are byte-for-byte deterministic") {
  auto cfg = quick("caseA");
  cfg.seed = 99;
  const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
  write_outputs(run_case(cfg), d1.string());
  write_outputs(run_case(cfg), d2.string());
  CHECK(slurp(d1 / "series.csv") == slurp(d2 / "series.csv"));
  CHECK(slurp(d1 / "certificates.json") == slurp(d2 / "certificates.json"));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("fixed-point and flat cases") {
  auto cfg = quick("caseA");
  cfg.u0 = "const:0.2";
  const auto rec = run_case(cfg);
  CHECK(rec.run.status.kind == Termination::converged);
  CHECK(rec.run.status.t_final == 0.0);
  CHECK(rec.run.rows.size() == 1);

  auto flat = quick("caseT4");
  const auto t4 = run_case(flat);
  CHECK(t4.nu == 0);
  CHECK(t4.k_p == 0.0);
  CHECK_FALSE(t4.hypothesis);
  CHECK_FALSE(t4.blowup);
}

TEST_CASE("zero-moment data gets no certificate") {
  const auto rec = run_case(quick("caseB0"));
  CHECK_FALSE(rec.blowup);
  CHECK(rec.blowup_note.find("perturb") != std::string::npos);
  CHECK(rec.moment_laws.empty());
}

TEST_CASE("unwritable output directory is reported") {
  const auto rec = run_case(quick("caseA"));
  CHECK_THROWS(write_outputs(rec, "/proc/qflow_cannot_write_here"));
}
