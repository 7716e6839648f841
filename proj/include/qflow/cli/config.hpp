// Run configuration: key = value text files, built-in presets, validation.

#ifndef QFLOW_CLI_CONFIG_HPP
#define QFLOW_CLI_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qflow::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string case_name;
  /// s2xt2 (unit sphere x square torus) or t2xt2.
  std::string manifold = "s2xt2";
  /// model (sigma = (l+m)^2 - 2l + 2m) or flat_t4 (sigma = (l+m)^2).
  std::string op = "model";
  std::string q0;
  std::string f = "const:1";
  std::string u0;

  int l_max = 8;
  int k_max = 4;
  double radius = 1.0;
  double side = 6.283185307179586;

  std::string scheme = "rk4";
  std::optional<double> dt;
  double atol = 1e-10;
  double rtol = 1e-8;
  double dt_min = 1e-10;
  double dt_max = 1e-2;
  double c_stab = 1.0;
  double t_end = 10.0;
  double conv_tol = 1e-8;
  double u_max = 25.0;
  double exponent_cap = 300.0;
  bool renormalize = false;
  int output_every = 100;
  long max_steps = 20'000'000;

  std::uint64_t seed = 0;
  std::string out = "out";

  void validate() const;
  /// Every key with its effective value, in file order.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

const std::vector<std::string>& preset_names();
/// Throws ConfigError listing the presets for an unknown name.
RunConfig preset(const std::string& name);

/// Parses key = value lines ('#' starts a comment).  `case` selects a
/// preset (or `custom`); other keys override it regardless of order.
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config(const std::string& path);

/// Applies one key; `where` prefixes error messages.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

}  // namespace qflow::cli

#endif  // QFLOW_CLI_CONFIG_HPP
