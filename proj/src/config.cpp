#include "qflow/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace qflow::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& v, const std::string& where) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": " + key + " expects a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v, const std::string& where) {
  long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": " + key + " expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v, const std::string& where) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(where + ": " + key + " expects on|off, got '" + v + "'");
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed,
                   const std::string& where) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += list.empty() ? a : std::string("|") + a;
  }
  throw ConfigError(where + ": " + key + " must be one of " + list + ", got '" + v + "'");
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("invalid " + key + ": " + what);
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"caseA", "caseB", "caseB0", "caseT4"};
  return names;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.case_name = name;
  if (name == "caseA") {
    c.q0 = "const:-2";
    c.u0 = "random:0.3";
    c.t_end = 20;
  } else if (name == "caseB") {
    c.q0 = "const:2";
    c.u0 = "sph:1:0:0.1";
    c.t_end = 5;
    c.dt_min = 1e-7;
  } else if (name == "caseB0") {
    c.q0 = "const:2";
    c.u0 = "sph:2:0:0.1+torus:1:0:0.1";
    c.t_end = 5;
    c.dt_min = 1e-7;
  } else if (name == "caseT4") {
    c.manifold = "t2xt2";
    c.op = "flat_t4";
    c.q0 = "const:0";
    c.u0 = "random:0.3";
    c.scheme = "ifrk4";
    c.dt_max = 0.05;
    c.t_end = 200;
  } else if (name == "custom") {
    c.q0.clear();
    c.u0.clear();
  } else {
    std::string list;
    for (const auto& p : preset_names()) list += (list.empty() ? "" : ", ") + p;
    throw ConfigError("unknown case '" + name + "'; presets: " + list + " (or custom)");
  }
  return c;
}

void set_key(RunConfig& c, const std::string& key, const std::string& v, const std::string& where) {
  if (key == "manifold") c.manifold = one_of(key, v, {"s2xt2", "t2xt2"}, where);
  else if (key == "operator") c.op = one_of(key, v, {"model", "flat_t4"}, where);
  else if (key == "q0") c.q0 = v;
  else if (key == "f") c.f = v;
  else if (key == "u0") c.u0 = v;
  else if (key == "l_max") c.l_max = static_cast<int>(to_long(key, v, where));
  else if (key == "k_max") c.k_max = static_cast<int>(to_long(key, v, where));
  else if (key == "radius") c.radius = to_double(key, v, where);
  else if (key == "side") c.side = to_double(key, v, where);
  else if (key == "scheme") c.scheme = one_of(key, v, {"rk4", "adaptive", "ifrk4"}, where);
  else if (key == "dt") c.dt = v == "auto" ? std::nullopt : std::optional<double>(to_double(key, v, where));
  else if (key == "atol") c.atol = to_double(key, v, where);
  else if (key == "rtol") c.rtol = to_double(key, v, where);
  else if (key == "dt_min") c.dt_min = to_double(key, v, where);
  else if (key == "dt_max") c.dt_max = to_double(key, v, where);
  else if (key == "c_stab") c.c_stab = to_double(key, v, where);
  else if (key == "t_end") c.t_end = to_double(key, v, where);
  else if (key == "conv_tol") c.conv_tol = to_double(key, v, where);
  else if (key == "u_max") c.u_max = to_double(key, v, where);
  else if (key == "exponent_cap") c.exponent_cap = to_double(key, v, where);
  else if (key == "renormalize") c.renormalize = to_bool(key, v, where);
  else if (key == "output_every") c.output_every = static_cast<int>(to_long(key, v, where));
  else if (key == "max_steps") c.max_steps = to_long(key, v, where);
  else if (key == "seed") {
    if (v.empty() || v[0] == '-') throw ConfigError(where + ": seed must be a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(to_long(key, v, where));
  } else if (key == "out") c.out = v;
  else throw ConfigError(where + ": unknown key '" + key + "'");
}

void RunConfig::validate() const {
  require(!case_name.empty(), "case", "missing");
  require(!q0.empty(), "q0", "missing (required for custom cases)");
  require(!u0.empty(), "u0", "missing (required for custom cases)");
  require(!f.empty(), "f", "missing");
  require(l_max >= 4 && l_max <= 64, "l_max", "must be in [4, 64]");
  require(k_max >= 2 && k_max <= 64, "k_max", "must be in [2, 64]");
  require(radius > 0, "radius", "must be positive");
  require(side > 0, "side", "must be positive");
  require(manifold != "s2xt2" || op == "model", "operator", "s2xt2 carries the model operator");
  require(manifold != "t2xt2" || op == "flat_t4", "operator", "t2xt2 carries the flat_t4 operator");
  require(!dt || *dt > 0, "dt", "must be positive");
  require(atol > 0, "atol", "must be positive");
  require(rtol > 0, "rtol", "must be positive");
  require(dt_min > 0 && dt_min < dt_max, "dt_min", "need 0 < dt_min < dt_max");
  require(c_stab > 0, "c_stab", "must be positive");
  require(t_end > 0, "t_end", "must be positive");
  require(conv_tol > 0, "conv_tol", "must be positive");
  require(u_max > 0, "u_max", "must be positive");
  require(exponent_cap > 0 && exponent_cap <= 700, "exponent_cap", "must be in (0, 700]");
  require(output_every >= 1, "output_every", "must be >= 1");
  require(max_steps >= 1, "max_steps", "must be >= 1");
  require(!out.empty(), "out", "must not be empty");
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  return {{"case", case_name},
          {"manifold", manifold},
          {"operator", op},
          {"q0", q0},
          {"f", f},
          {"u0", u0},
          {"l_max", std::to_string(l_max)},
          {"k_max", std::to_string(k_max)},
          {"radius", fmt(radius)},
          {"side", fmt(side)},
          {"scheme", scheme},
          {"dt", dt ? fmt(*dt) : "auto"},
          {"atol", fmt(atol)},
          {"rtol", fmt(rtol)},
          {"dt_min", fmt(dt_min)},
          {"dt_max", fmt(dt_max)},
          {"c_stab", fmt(c_stab)},
          {"t_end", fmt(t_end)},
          {"conv_tol", fmt(conv_tol)},
          {"u_max", fmt(u_max)},
          {"exponent_cap", fmt(exponent_cap)},
          {"renormalize", renormalize ? "on" : "off"},
          {"output_every", std::to_string(output_every)},
          {"max_steps", std::to_string(max_steps)},
          {"seed", std::to_string(seed)},
          {"out", out}};
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::optional<std::pair<std::string, int>> case_line;
  std::vector<std::tuple<std::string, std::string, int>> entries;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (auto it = seen.find(key); it != seen.end())
      throw ConfigError(where + ": duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")");
    seen[key] = number;
    if (key == "case")
      case_line = {value, number};
    else
      entries.emplace_back(key, value, number);
  }
  if (!case_line) throw ConfigError(source + ": missing required key 'case'");
  RunConfig cfg;
  try {
    cfg = preset(case_line->first);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ":" + std::to_string(case_line->second) + ": " + e.what());
  }
  for (const auto& [key, value, line_no] : entries) set_key(cfg, key, value, source + ":" + std::to_string(line_no));
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    // point at the offending line when the key was given explicitly
    std::string msg = e.what();
    for (const auto& [key, line_no] : seen)
      if (msg.rfind("invalid " + key + ":", 0) == 0) throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg);
    throw ConfigError(source + ": " + msg);
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace qflow::cli
