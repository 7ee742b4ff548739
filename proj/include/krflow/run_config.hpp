#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "krflow/errors.hpp"

namespace krflow {

/// Flat key=value run configuration shared by every experiment. File values
/// override the defaults, command-line flags override the file. Every field
/// is re-validated against its consumer's preconditions before use.
struct RunConfig {
  double b = 1.0;               // gluing parameter, fiber area 1/b
  double a = 0.25;              // gluing exponent
  int k = 1;                    // correction order carried by the cap
  double delta = 1.0;           // chart radius
  std::string mode = "hyperbolic";  // background: hyperbolic | quartic
  double T = 1e3;               // evolution start
  double t_end = 1e5;           // evolution end
  int nodes = 1024;             // radial grid nodes
  double dt_kappa = 1e-3;       // time step controller dt = kappa t
  double newton_tol = 1e-10;
  double eta_max = 8e3;         // correction-series domain
  double lambda = 32.0;         // sweep anchor: first dyadic time level
  int levels = 20;              // dyadic levels above lambda
  double rho_floor_scale = 1e-3;  // grid floor = scale / t_end
  int pair_budget = 2000;       // quasiparabolic pairs per time level
  double tail_budget = 1e-2;    // stability tail target
  std::uint64_t seed = 12345;

  void set(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> items() const;

  void validate() const {
    if (!(b > 0.0)) throw config_error("config: b must be positive");
    if (!(a > 0.0 && a < 0.5)) throw config_error("config: a must lie in (0, 1/2)");
    if (k < 0 || k > 6) throw config_error("config: k must lie in [0, 6]");
    if (!(delta > 0.0)) throw config_error("config: delta must be positive");
    if (mode != "hyperbolic" && mode != "quartic") {
      throw config_error("config: mode must be hyperbolic or quartic");
    }
    if (!(T > 0.0) || !(t_end > T)) throw config_error("config: need 0 < T < t_end");
    if (nodes < 16) throw config_error("config: need at least 16 nodes");
    if (!(dt_kappa > 0.0) || !(newton_tol > 0.0)) {
      throw config_error("config: solver tolerances must be positive");
    }
    if (!(eta_max > 1.0)) throw config_error("config: eta_max must exceed 1");
    if (!(lambda > 0.0)) throw config_error("config: lambda must be positive");
    if (levels < 2) throw config_error("config: need at least 2 dyadic levels");
    if (!(rho_floor_scale > 0.0)) {
      throw config_error("config: rho_floor_scale must be positive");
    }
    if (pair_budget < 1) throw config_error("config: pair_budget must be positive");
    if (!(tail_budget > 0.0)) throw config_error("config: tail_budget must be positive");
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw config_error("config: bad numeric value '" + value + "' for key " + key);
  }
  return out;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw config_error("config: bad integer value '" + value + "' for key " + key);
  }
  return out;
}

inline std::string format_double_kv(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "b") b = detail::parse_double(key, value);
  else if (key == "a") a = detail::parse_double(key, value);
  else if (key == "k") k = int(detail::parse_int(key, value));
  else if (key == "delta") delta = detail::parse_double(key, value);
  else if (key == "mode") mode = value;
  else if (key == "T") T = detail::parse_double(key, value);
  else if (key == "t_end") t_end = detail::parse_double(key, value);
  else if (key == "nodes") nodes = int(detail::parse_int(key, value));
  else if (key == "dt_kappa") dt_kappa = detail::parse_double(key, value);
  else if (key == "newton_tol") newton_tol = detail::parse_double(key, value);
  else if (key == "eta_max") eta_max = detail::parse_double(key, value);
  else if (key == "lambda") lambda = detail::parse_double(key, value);
  else if (key == "levels") levels = int(detail::parse_int(key, value));
  else if (key == "rho_floor_scale") rho_floor_scale = detail::parse_double(key, value);
  else if (key == "pair_budget") pair_budget = int(detail::parse_int(key, value));
  else if (key == "tail_budget") tail_budget = detail::parse_double(key, value);
  else if (key == "seed") seed = std::uint64_t(detail::parse_int(key, value));
  else throw config_error("config: unknown key '" + key + "'");
}

inline std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  using detail::format_double_kv;
  return {
      {"b", format_double_kv(b)},
      {"a", format_double_kv(a)},
      {"k", std::to_string(k)},
      {"delta", format_double_kv(delta)},
      {"mode", mode},
      {"T", format_double_kv(T)},
      {"t_end", format_double_kv(t_end)},
      {"nodes", std::to_string(nodes)},
      {"dt_kappa", format_double_kv(dt_kappa)},
      {"newton_tol", format_double_kv(newton_tol)},
      {"eta_max", format_double_kv(eta_max)},
      {"lambda", format_double_kv(lambda)},
      {"levels", std::to_string(levels)},
      {"rho_floor_scale", format_double_kv(rho_floor_scale)},
      {"pair_budget", std::to_string(pair_budget)},
      {"tail_budget", format_double_kv(tail_budget)},
      {"seed", std::to_string(seed)},
  };
}

inline void print_run_config(const RunConfig& cfg, std::ostream& os) {
  for (const auto& [key, value] : cfg.items()) os << key << " = " << value << "\n";
}

/// Parse "key = value" lines; '#' starts a comment, blank lines are skipped.
inline void apply_config_text(RunConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return (b == std::string::npos) ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw config_error("config line " + std::to_string(lineno) + ": expected key=value");
    }
    cfg.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

inline RunConfig parse_run_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file: " + path);
  apply_config_text(base, in);
  return base;
}

}  // namespace krflow
