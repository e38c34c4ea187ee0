#pragma once

// File formats: measure JSON, coupling CSV, duals / multimap / report JSON,
// and the beta-angle CSV of the dichotomy probe.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphereot/errors.hpp"
#include "sphereot/map_extractor.hpp"
#include "sphereot/measure.hpp"
#include "sphereot/mtw.hpp"
#include "sphereot/regularity.hpp"
#include "sphereot/transport.hpp"

namespace sphereot {

using json = nlohmann::ordered_json;

/// Shortest round-trip text of a double, the same in JSON and CSV output.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

/// JSON value of a double; non-finite values become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline json to_json(const SpherePoint& p) { return to_json(p.coords()); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IOError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IOError(path.string() + ": " + e.what());
  }
}

// ---- measures -------------------------------------------------------------

/// {"n": int, "atoms": [{"p": [..], "w": float, "a": float}]}
inline json measure_to_json(const DiscreteMeasure& m) {
  json atoms = json::array();
  for (std::size_t i = 0; i < m.size(); ++i)
    atoms.push_back({{"p", to_json(m.point(i))}, {"w", m.weight(i)}, {"a", m.cell_areas()[i]}});
  return {{"n", m.dim()}, {"atoms", std::move(atoms)}};
}

/// Parses and validates a measure; malformed files raise IOError, invariant
/// violations (non-unit points, bad mass) raise DomainError.
inline DiscreteMeasure measure_from_json(const json& j) {
  try {
    const int n = j.at("n").get<int>();
    std::vector<SpherePoint> pts;
    std::vector<double> w, a;
    for (const auto& atom : j.at("atoms")) {
      const auto p = atom.at("p").get<std::vector<double>>();
      if (static_cast<int>(p.size()) != n + 1)
        throw DomainError("measure atom has " + std::to_string(p.size()) + " coordinates, expected " +
                          std::to_string(n + 1));
      pts.emplace_back(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
      w.push_back(atom.at("w").get<double>());
      a.push_back(atom.at("a").get<double>());
    }
    return DiscreteMeasure(n, std::move(pts), std::move(w), std::move(a));
  } catch (const json::exception& e) {
    throw IOError(std::string("malformed measure file: ") + e.what());
  }
}

inline void save_measure(const std::filesystem::path& path, const DiscreteMeasure& m) {
  write_json(path, measure_to_json(m));
}

inline DiscreteMeasure load_measure(const std::filesystem::path& path) { return measure_from_json(read_json(path)); }

// ---- couplings and duals ---------------------------------------------------

inline std::string coupling_csv(const Coupling& c) {
  std::string out = "i,j,mass\n";
  for (const auto& e : c.entries)
    out += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_number(e.mass) + "\n";
  return out;
}

inline void save_coupling(const std::filesystem::path& path, const Coupling& c) { write_text(path, coupling_csv(c)); }

/// Reads "i,j,mass" rows (a header line is skipped). Indices are checked
/// against the given sizes; total_cost is left at 0.
inline Coupling load_coupling(const std::filesystem::path& path, std::size_t source_count, std::size_t target_count) {
  std::istringstream in(read_text(path));
  Coupling c;
  c.source_count = source_count;
  c.target_count = target_count;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "i,j,mass") continue;
    std::istringstream row(line);
    std::string a, b, m;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, m))
      throw IOError(path.string() + ":" + std::to_string(lineno) + ": expected i,j,mass");
    CouplingEntry e;
    try {
      e.i = std::stoul(a);
      e.j = std::stoul(b);
      e.mass = std::stod(m);
    } catch (const std::exception&) {
      throw IOError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    if (e.i >= source_count || e.j >= target_count)
      throw IOError(path.string() + ":" + std::to_string(lineno) + ": index out of range");
    if (!(e.mass >= 0.0)) throw IOError(path.string() + ":" + std::to_string(lineno) + ": negative mass");
    c.entries.push_back(e);
  }
  return c;
}

inline json duals_to_json(const DualPotentials& d, double total_cost) {
  json phi = json::array(), psi = json::array();
  for (double v : d.phi) phi.push_back(number(v));
  for (double v : d.psi_vals) psi.push_back(number(v));
  return {{"phi", std::move(phi)}, {"psi", std::move(psi)}, {"total_cost", total_cost}};
}

// ---- maps ------------------------------------------------------------------

inline json multimap_to_json(const MultiMap& mm) {
  json atoms = json::array();
  for (std::size_t i = 0; i < mm.size(); ++i) {
    const auto& e = mm[i];
    atoms.push_back({{"i", i},
                     {"t_plus", to_json(e.t_plus)},
                     {"t_minus", to_json(e.t_minus)},
                     {"lambda", e.lambda},
                     {"residual", e.collinearity_residual},
                     {"region", to_string(e.region)}});
  }
  return {{"n", mm.n}, {"merge_tol", mm.merge_tol}, {"zero_tol", mm.zero_tol}, {"anomalies", mm.anomalies},
          {"atoms", std::move(atoms)}};
}

inline json inverse_maps_to_json(const InverseMaps& inv) {
  json atoms = json::array();
  for (std::size_t j = 0; j < inv.size(); ++j) {
    const auto& e = inv[j];
    atoms.push_back({{"j", j},
                     {"s_plus", to_json(e.s_plus)},
                     {"s_minus", to_json(e.s_minus)},
                     {"omega", e.omega},
                     {"residual", e.collinearity_residual},
                     {"region", to_string(e.region)}});
  }
  return {{"n", inv.n}, {"atoms", std::move(atoms)}};
}

// ---- reports ---------------------------------------------------------------

inline json holder_report_to_json(const HolderReport& r) {
  json env = json::array(), pairs = json::array();
  for (const auto& [lr, ld] : r.envelope) env.push_back({lr, ld});
  for (const auto& [lr, ld] : r.log_pairs) pairs.push_back({lr, ld});
  return {{"region", r.region},
          {"alpha_hat", number(r.alpha_hat)},
          {"C_hat", number(r.C_hat)},
          {"scale_window", {r.scale_window.r_min, r.scale_window.r_max}},
          {"pair_count", r.pair_count},
          {"low_confidence", r.low_confidence},
          {"degenerate", r.degenerate},
          {"envelope", std::move(env)},
          {"log_pairs", std::move(pairs)}};
}

inline json region_constants_to_json(const RegionConstants& rc) {
  return {{"k_U", rc.k_U},
          {"k_U_literal", number(rc.k_U_literal)},
          {"C_plus", rc.C_plus},
          {"C_minus_statement", rc.C_minus_statement},
          {"C_minus_proof", rc.C_minus_proof}};
}

inline json condition_report_to_json(const ConditionReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json a = json::array();
    for (double v : row) a.push_back(number(v));
    rows.push_back(std::move(a));
  }
  json worst = json::array();
  if (r.worst_pair.first.ambient_dim() > 0)
    worst = json::array({to_json(r.worst_pair.first), to_json(r.worst_pair.second)});
  return {{"condition", to_string(r.condition)},
          {"sample_count", r.sample_count},
          {"min_margin", number(r.min_margin)},
          {"tolerance", r.tolerance},
          {"pass", r.pass()},
          {"flagged", r.flagged},
          {"vacuous", r.vacuous},
          {"note", r.note},
          {"worst_pair", std::move(worst)},
          {"columns", r.columns},
          {"rows", std::move(rows)}};
}

/// One row per (y1, y) pair: y1,y,beta,gamma,in_theta_m.
inline std::string beta_csv(const std::vector<DichotomyProbe>& probes) {
  std::string out = "y1,y,beta,gamma,in_theta_m\n";
  for (const auto& p : probes) {
    for (const auto& b : p.betas) {
      const bool member = std::find(p.members.begin(), p.members.end(), b.j) != p.members.end();
      out += std::to_string(p.y1) + "," + std::to_string(b.j) + "," + format_number(b.beta) + "," +
             format_number(b.gamma) + "," + (member ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace sphereot
