// Case assembly, end-to-end runs and output files.

#ifndef QFLOW_CLI_RUNNER_HPP
#define QFLOW_CLI_RUNNER_HPP

#include "qflow/cli/config.hpp"
#include "qflow/cli/fields.hpp"
#include "qflow/hypothesis.hpp"
#include "qflow/run.hpp"

#include <json.hpp>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qflow::cli {

inline constexpr int kDimension = 4;

struct Case {
  RunConfig config;
  Grid grid;
  BackgroundPtr<double> background;
  FlowConfig<double> flow;
};

Case build_case(const RunConfig& cfg);

struct MomentLaw {
  std::string phi_id;
  double m0 = 0;
  /// max over output rows of |m(t) - m0 e^{rate t}| / |m0|.
  double max_rel_error = 0;
  double rate_fit = 0;
  double rate_theory = 0;
};

struct CaseRecord {
  RunConfig config;
  Grid grid;
  std::string grid_summary;
  double k_p = 0;
  int nu = 0;
  double lambda1 = 0;
  double sigma_max = 0;
  std::vector<std::string> phi_ids;
  RunRecord<double> run;
  std::optional<SignPatternReport<double>> hypothesis;
  std::optional<BlowupCertificate<double>> blowup;
  /// Why no blow-up certificate was attached, when k_p > 0.
  std::string blowup_note;
  std::vector<MomentLaw> moment_laws;
  double final_residual = 0;
  MonitorFlags<double> monitors;

  /// 0 for converged, maxtime, or blow-up within the certified bound.
  int exit_code() const;
};

CaseRecord run_case(const RunConfig& cfg);

/// Certificate for the basis function with the smallest bound among those
/// with nonzero moment; nullopt (with `note`) when none applies.
std::optional<BlowupCertificate<double>> best_blowup_certificate(const ScalarField<double>& u0,
                                                                 const ConformalBackground<double>& bg,
                                                                 std::string& note);

std::string series_header(int nu);
void write_series(std::ostream& os, const std::vector<DiagnosticRow<double>>& rows, int nu);

nlohmann::json to_json(const SignPatternReport<double>& rep, const ProductGrid<double>& grid);
nlohmann::json to_json(const BlowupCertificate<double>& cert);
nlohmann::json manifest_json(const CaseRecord& rec);
nlohmann::json certificates_json(const CaseRecord& rec);

/// Writes series.csv, certificates.json and manifest.json into `dir`
/// (created if needed).  Every file is attempted; failures are collected
/// into one exception naming each file.
void write_outputs(const CaseRecord& rec, const std::string& dir);

std::string version();

}  // namespace qflow::cli

#endif  // QFLOW_CLI_RUNNER_HPP
