#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "krflow/correction.hpp"
#include "krflow/errors.hpp"
#include "krflow/flow.hpp"
#include "krflow/glued_model.hpp"
#include "krflow/run_config.hpp"
#include "krflow/version.hpp"

namespace krflow {

/// Shortest round-trip decimal form; locale-independent, '.' decimal point.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw io_error("write failed: " + path);
}

/// Per-term samples of the correction hierarchy on a log grid.
inline std::string series_csv(const CorrectionSeries& cs, int points = 200,
                              double eta_min = 1e-3) {
  if (points < 2) throw config_error("series csv: need at least 2 points");
  std::string out = "j,eta,G_j,dG_j,ddG_j\n";
  for (int j = 1; j <= cs.order(); ++j) {
    const auto& g = cs.term(j);
    for (int i = 0; i < points; ++i) {
      double eta = eta_min * std::pow(cs.eta_max / eta_min, double(i) / (points - 1));
      out += std::to_string(j);
      out += ',';
      out += format_double(eta);
      out += ',';
      out += format_double(g.value(eta));
      out += ',';
      out += format_double(g.d1(eta));
      out += ',';
      out += format_double(g.d2(eta));
      out += '\n';
    }
  }
  return out;
}

/// Radial profile of the glued model at one time.
inline std::string model_csv(const GluedModelSpec& spec, double t, int points = 400,
                             double rho_min = 1e-6) {
  if (points < 2) throw config_error("model csv: need at least 2 points");
  std::string out = "t,rho,phi_mod,phi_eigen1,phi_eigen2,f_mod\n";
  const double rho_max = spec.delta * spec.delta;
  for (int i = 0; i < points; ++i) {
    double rho = rho_min * std::pow(rho_max / rho_min, double(i) / (points - 1));
    auto g = glued_model(spec, t, rho);
    out += format_double(t);
    out += ',';
    out += format_double(rho);
    out += ',';
    out += format_double(g.value);
    out += ',';
    out += format_double(g.phi);
    out += ',';
    out += format_double(g.psi);
    out += ',';
    out += format_double(g.f);
    out += '\n';
  }
  return out;
}

/// Sampled rows of an evolution: t, sup_v, sup_f, K, area_coeff.
inline std::string trace_csv(const EvolutionTrace& trace) {
  std::string out = "t,sup_v,sup_f,K,area_coeff\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    out += format_double(trace.times[i]);
    out += ',';
    out += format_double(trace.sup_v[i]);
    out += ',';
    out += format_double(trace.sup_f[i]);
    out += ',';
    out += format_double(trace.bilip[i]);
    out += ',';
    out += format_double(trace.area[i]);
    out += '\n';
  }
  return out;
}

/// Weighted-norm sweep rows for the boundedness checks.
inline std::string weighted_sweep_csv(const std::vector<double>& t,
                                      const std::vector<double>& weighted_sup,
                                      const std::vector<double>& weighted_holder) {
  if (t.size() != weighted_sup.size() || t.size() != weighted_holder.size()) {
    throw config_error("sweep csv: column length mismatch");
  }
  std::string out = "t,weighted_sup,weighted_holder\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out += format_double(t[i]);
    out += ',';
    out += format_double(weighted_sup[i]);
    out += ',';
    out += format_double(weighted_holder[i]);
    out += '\n';
  }
  return out;
}

/// Generic named-column table; every column must share one length.
inline std::string column_csv(const std::vector<std::string>& names,
                              const std::vector<const std::vector<double>*>& cols) {
  if (names.empty() || names.size() != cols.size()) {
    throw config_error("column csv: need one name per column");
  }
  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (cols[c]->size() != cols[0]->size()) {
      throw config_error("column csv: column length mismatch");
    }
    out += names[c];
    out += (c + 1 < names.size()) ? ',' : '\n';
  }
  for (std::size_t i = 0; i < cols[0]->size(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out += format_double((*cols[c])[i]);
      out += (c + 1 < cols.size()) ? ',' : '\n';
    }
  }
  return out;
}

/// JSON summary: config echo, metrics, pass flags, version stamp, seed.
/// Field order is fixed, so identical inputs give identical bytes.
inline std::string summary_json(const RunConfig& cfg,
                                const std::vector<std::pair<std::string, double>>& metrics,
                                const std::vector<std::pair<std::string, bool>>& pass_flags) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json echo;
  for (const auto& [key, value] : cfg.items()) echo[key] = value;
  j["config_echo"] = std::move(echo);
  auto m = nlohmann::ordered_json::object();
  for (const auto& [key, value] : metrics) m[key] = value;
  j["metrics"] = std::move(m);
  auto p = nlohmann::ordered_json::object();
  for (const auto& [key, value] : pass_flags) p[key] = value;
  j["pass_flags"] = std::move(p);
  j["versions"] = {{"krflow", version_number}, {"format", 1}};
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

}  // namespace krflow
