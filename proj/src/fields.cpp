#include "qflow/cli/fields.hpp"

#include "qflow/cli/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace qflow::cli {

namespace {

std::vector<std::string> split(const std::string& s, char sep, bool skip_exponent) {
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool exponent = skip_exponent && i > 0 && (s[i - 1] == 'e' || s[i - 1] == 'E') && i >= 2 &&
                          (std::isdigit(static_cast<unsigned char>(s[i - 2])) || s[i - 2] == '.');
    if (c == sep && !exponent) {
      parts.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

double number(const std::string& v, const std::string& spec) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError("field '" + spec + "': bad number '" + v + "'");
  return out;
}

int integer(const std::string& v, const std::string& spec) {
  int out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError("field '" + spec + "': bad integer '" + v + "'");
  return out;
}

Field single_mode(const Grid& grid, bool first, int a, int b, double amp, const std::string& spec) {
  const auto& factor = first ? grid->first() : grid->second();
  const Eigen::Index idx = factor.mode_index(a, b);
  if (idx < 0) throw ConfigError("field '" + spec + "': mode not resolved on this grid");
  return first ? mode_field<double>(grid, idx, grid->second().mode_index(0, 0), amp)
               : mode_field<double>(grid, grid->first().mode_index(0, 0), idx, amp);
}

}  // namespace

Field random_band_limited(const Grid& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat<double> c(grid->first().mode_count(), grid->second().mode_count());
  // column-major fill order keeps the draw sequence fixed
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = normal(rng) / (1 + grid->lambda()(i, j) + grid->mu()(i, j));
  c(grid->first().mode_index(0, 0), grid->second().mode_index(0, 0)) = 0;
  Field f = synthesize(Coefficients<double>{grid, c});
  const double s = sup_norm(f);
  return Field(grid, f.values() / s);
}

Field bump(const Grid& grid) {
  auto profile = [](const FactorGrid<double>& g) {
    Vec<double> p(g.node_count());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const auto& x = g.nodes()[static_cast<std::size_t>(i)];
      if (g.kind() == FactorKind::sphere) {
        const double h = (1 + std::cos(x[0])) / 2;
        p(i) = h * h;
      } else {
        p(i) = (1 + std::cos(2 * std::numbers::pi * x[0] / g.size())) / 2;
      }
    }
    return p;
  };
  const Mat<double> m = profile(grid->first()) * profile(grid->second()).transpose();
  return Field(grid, m.reshaped());
}

Field parse_field(const std::string& spec, const Grid& grid, std::uint64_t seed) {
  if (spec.empty()) throw ConfigError("empty field specification");
  std::mt19937_64 rng(seed);
  Field total(grid);
  for (const auto& term : split(spec, '+', true)) {
    const auto p = split(term, ':', false);
    const std::string& kind = p[0];
    auto need = [&](std::size_t count) {
      if (p.size() != count) throw ConfigError("field '" + spec + "': term '" + term + "' has wrong arity");
    };
    Vec<double> add;
    if (kind == "const") {
      need(2);
      add = Vec<double>::Constant(grid->node_count(), number(p[1], spec));
    } else if (kind == "sph") {
      need(4);
      if (grid->first().kind() != FactorKind::sphere) throw ConfigError("field '" + spec + "': no sphere factor");
      const int l = integer(p[1], spec), m = integer(p[2], spec);
      if (l < 0 || std::abs(m) > l) throw ConfigError("field '" + spec + "': need |m| <= l");
      add = single_mode(grid, true, l, m, number(p[3], spec), spec).values();
    } else if (kind == "t1") {
      need(4);
      if (grid->first().kind() != FactorKind::torus) throw ConfigError("field '" + spec + "': first factor is not a torus");
      add = single_mode(grid, true, integer(p[1], spec), integer(p[2], spec), number(p[3], spec), spec).values();
    } else if (kind == "torus") {
      need(4);
      add = single_mode(grid, false, integer(p[1], spec), integer(p[2], spec), number(p[3], spec), spec).values();
    } else if (kind == "random") {
      need(2);
      add = number(p[1], spec) * random_band_limited(grid, rng).values();
    } else if (kind == "bump") {
      need(2);
      add = number(p[1], spec) * bump(grid).values();
    } else {
      throw ConfigError("field '" + spec + "': unknown term '" + kind + "' (const, sph, t1, torus, random, bump)");
    }
    total.mutable_values() += add;
  }
  return total;
}

}  // namespace qflow::cli
