#pragma once

// End-to-end run: measures -> optimal plan -> multimap and regions ->
// regularity diagnostics -> cost-condition checks, with every artifact written
// into one run directory.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/io.hpp"
#include "sphereot/map_extractor.hpp"
#include "sphereot/measure.hpp"
#include "sphereot/mtw.hpp"
#include "sphereot/regularity.hpp"
#include "sphereot/transport.hpp"

namespace sphereot {

enum class SolverKind { Exact, Entropic };

inline const char* to_string(SolverKind s) { return s == SolverKind::Exact ? "exact" : "entropic"; }

inline SolverKind parse_solver(const std::string& s) {
  if (s == "exact") return SolverKind::Exact;
  if (s == "entropic") return SolverKind::Entropic;
  throw ConfigError("unknown solver '" + s + "' (expected exact or entropic)");
}

struct RunConfig {
  int n = 2;
  int mesh_count = 500;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::Exact;
  double reg = 0.01;
  int sinkhorn_max_iter = 5000;
  double sinkhorn_tol = 1e-9;
  /// Entropic plans are dense; entries below this fraction of their row mass
  /// are dropped before extraction.
  double support_floor = 1e-3;
  /// Unset values are resolved from the mesh: epsilon = 0.05 / area(S^n),
  /// merge_tol = 3 x spacing, zero_tol = spacing.
  std::optional<double> epsilon_suitable;
  std::optional<double> merge_tol;
  std::optional<double> zero_tol;
  int dichotomy_m = 4;
  double holder_min_alignment = 0.2;
  int mtw_null_pairs = 1000;
  std::filesystem::path output_dir = "run";

  void validate() const {
    if (n < 1) throw ConfigError("n must be at least 1");
    if (mesh_count < n + 2)
      throw ConfigError("mesh_count " + std::to_string(mesh_count) + " is below n + 2 = " + std::to_string(n + 2));
    auto positive = [](const std::optional<double>& v, const char* name) {
      if (v && !(*v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(epsilon_suitable, "epsilon_suitable");
    positive(merge_tol, "merge_tol");
    positive(zero_tol, "zero_tol");
    if (!(reg > 0.0)) throw ConfigError("reg must be positive");
    if (!(sinkhorn_tol > 0.0)) throw ConfigError("sinkhorn tolerance must be positive");
    if (sinkhorn_max_iter < 1) throw ConfigError("sinkhorn max_iter must be at least 1");
    if (!(support_floor >= 0.0 && support_floor < 1.0)) throw ConfigError("support_floor must lie in [0, 1)");
    if (dichotomy_m <= 1) throw ConfigError("dichotomy m must exceed 1");
    if (mtw_null_pairs < 0) throw ConfigError("mtw null pair count must be nonnegative");
  }
};

// ---- pass/fail table ---------------------------------------------------------

enum class CheckStatus { Pass, Fail, Skip };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Skip: return "SKIP";
  }
  return "?";
}

struct CheckLine {
  std::string stage;
  std::string claim;
  double value = 0.0;
  std::string relation;
  double threshold = 0.0;
  CheckStatus status = CheckStatus::Skip;
  std::string note;
};

class CheckTable {
 public:
  explicit CheckTable(std::string stage = {}) : stage_(std::move(stage)) {}

  void at_most(const std::string& claim, double value, double threshold, std::string note = {}) {
    add(claim, value, "<=", threshold, value <= threshold, std::move(note));
  }
  void at_least(const std::string& claim, double value, double threshold, std::string note = {}) {
    add(claim, value, ">=", threshold, value >= threshold, std::move(note));
  }
  void greater(const std::string& claim, double value, double threshold, std::string note = {}) {
    add(claim, value, ">", threshold, value > threshold, std::move(note));
  }
  void skip(const std::string& claim, std::string why) {
    lines_.push_back({stage_, claim, std::nan(""), "", std::nan(""), CheckStatus::Skip, std::move(why)});
  }
  void fail(const std::string& claim, std::string why) {
    lines_.push_back({stage_, claim, std::nan(""), "", std::nan(""), CheckStatus::Fail, std::move(why)});
  }

  const std::vector<CheckLine>& lines() const noexcept { return lines_; }
  bool all_pass() const {
    return std::none_of(lines_.begin(), lines_.end(), [](const CheckLine& l) { return l.status == CheckStatus::Fail; });
  }
  void append(const CheckTable& other) { lines_.insert(lines_.end(), other.lines_.begin(), other.lines_.end()); }
  void push(CheckLine line) { lines_.push_back(std::move(line)); }

 private:
  void add(const std::string& claim, double value, const char* rel, double threshold, bool ok, std::string note) {
    lines_.push_back({stage_, claim, value, rel, threshold, ok ? CheckStatus::Pass : CheckStatus::Fail, std::move(note)});
  }

  std::string stage_;
  std::vector<CheckLine> lines_;
};

inline json checks_to_json(const CheckTable& t) {
  json a = json::array();
  for (const auto& l : t.lines())
    a.push_back({{"stage", l.stage},
                 {"claim", l.claim},
                 {"value", number(l.value)},
                 {"relation", l.relation},
                 {"threshold", number(l.threshold)},
                 {"status", to_string(l.status)},
                 {"note", l.note}});
  return a;
}

inline CheckTable checks_from_json(const json& a) {
  CheckTable t;
  for (const auto& l : a) {
    auto num = [](const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    CheckLine line{l.at("stage").get<std::string>(), l.at("claim").get<std::string>(), num(l.at("value")),
                   l.at("relation").get<std::string>(), num(l.at("threshold")), CheckStatus::Skip,
                   l.at("note").get<std::string>()};
    const auto s = l.at("status").get<std::string>();
    line.status = s == "PASS" ? CheckStatus::Pass : s == "FAIL" ? CheckStatus::Fail : CheckStatus::Skip;
    t.push(std::move(line));
  }
  return t;
}

// ---- stages ----------------------------------------------------------------

struct MeasurePair {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  /// Mean nearest-neighbour chord distance of the coarser of the two.
  double spacing = 0.0;
};

/// Resolved tolerances of a run.
struct Tolerances {
  double epsilon = 0.0;
  double merge_tol = 0.0;
  double zero_tol = 0.0;
};

inline Tolerances resolve_tolerances(const RunConfig& cfg, double spacing) {
  return {cfg.epsilon_suitable.value_or(default_epsilon(cfg.n)), cfg.merge_tol.value_or(3.0 * spacing),
          cfg.zero_tol.value_or(spacing)};
}

inline bool is_measure_file(const std::string& spec) {
  return spec.size() > 5 && spec.compare(spec.size() - 5, 5, ".json") == 0;
}

/// A measure spec is a built-in density ("uniform", "cap:k", "band:k")
/// sampled on the run mesh, or a path to a measure JSON file.
inline MeasurePair prepare_measures(const RunConfig& cfg, const std::string& mu_spec, const std::string& nu_spec) {
  cfg.validate();
  std::optional<Mesh> mesh;
  auto build = [&](const std::string& spec) {
    if (is_measure_file(spec)) {
      auto m = load_measure(spec);
      if (m.dim() != cfg.n)
        throw ConfigError(spec + " lives on S^" + std::to_string(m.dim()) + ", run expects S^" + std::to_string(cfg.n));
      return m;
    }
    const Density d = [&] {
      try {
        return builtin_density(spec);
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    }();
    if (!mesh) mesh = quasi_uniform_mesh(cfg.n, cfg.mesh_count, cfg.seed);
    return sample_density(d, *mesh);
  };
  MeasurePair p{build(mu_spec), build(nu_spec), 0.0};
  p.spacing = std::max(detail::mean_nearest_neighbour(p.mu.points()), detail::mean_nearest_neighbour(p.nu.points()));
  return p;
}

struct SolveStage {
  TransportSolution solution;
  /// Coupling used for extraction (pruned for entropic plans).
  Coupling support;
  json summary;
  CheckTable checks{"solve"};
};

/// Drops entries below `floor` times their row mass, then restores the row
/// marginals by rescaling each row.
inline Coupling prune_support(const Coupling& c, double floor) {
  const auto rows = c.row_sums();
  std::vector<double> kept(c.source_count, 0.0);
  Coupling out;
  out.source_count = c.source_count;
  out.target_count = c.target_count;
  for (const auto& e : c.entries)
    if (e.mass >= floor * rows[e.i]) {
      out.entries.push_back(e);
      kept[e.i] += e.mass;
    }
  for (auto& e : out.entries) e.mass *= rows[e.i] / kept[e.i];
  return out;
}

inline SolveStage run_solve(const RunConfig& cfg, const MeasurePair& mp) {
  SolveStage st;
  const auto tol = resolve_tolerances(cfg, mp.spacing);
  const auto cert = check_suitable(mp.mu, mp.nu, tol.epsilon, false);
  double worst_density = 0.0;
  for (const auto& a : cert.worst_atoms)
    worst_density = std::max(worst_density, (a.side == Side::Source ? mp.mu : mp.nu).density(a.index));
  if (cert.ok())
    st.checks.at_most("measures are suitable (source density <= 1/eps, target density >= eps)", 0.0, 0.0,
                      "eps = " + format_number(tol.epsilon));
  else
    st.checks.fail("measures are suitable (source density <= 1/eps, target density >= eps)",
                   std::to_string(cert.worst_atoms.size()) + " atoms out of bounds at eps = " +
                       format_number(tol.epsilon));

  if (cfg.solver == SolverKind::Exact) {
    st.solution = solve_exact(mp.mu, mp.nu);
    st.support = st.solution.coupling;
  } else {
    st.solution = solve_entropic(mp.mu, mp.nu, cfg.reg, cfg.sinkhorn_max_iter, cfg.sinkhorn_tol);
    st.support = prune_support(st.solution.coupling, cfg.support_floor);
  }
  const auto& sol = st.solution;
  const double marg = sol.coupling.marginal_violation(mp.mu.weights(), mp.nu.weights());
  st.checks.at_most("coupling marginals match the measures", marg, kMarginalTolerance);

  const double dual = sol.duals.objective(mp.mu.weights(), mp.nu.weights());
  const double gap = std::abs(sol.coupling.total_cost - dual);
  const double cm = cyclical_monotonicity_violation(st.support, mp.mu, mp.nu);
  std::size_t brenier_misses = 0;
  if (cfg.solver == SolverKind::Exact) {
    st.checks.at_most("primal cost equals dual objective", gap, 1e-8);
    st.checks.at_most("plan support is cyclically monotone (largest swap gain)", cm, 1e-9);
    for (std::size_t i = 0; i < mp.mu.size(); ++i) {
      const auto bv = brenier_potential(sol.duals, mp.nu, mp.mu.point(i));
      for (const auto& e : st.support.entries)
        if (e.i == i && !std::binary_search(bv.argmax_set.begin(), bv.argmax_set.end(), e.j)) ++brenier_misses;
    }
    st.checks.at_most("support targets lie in the argmax set of the convex potential",
                      static_cast<double>(brenier_misses), 0.0);
  } else {
    st.checks.skip("primal cost equals dual objective", "entropic plan");
    st.checks.skip("plan support is cyclically monotone (largest swap gain)", "entropic plan");
    st.checks.skip("support targets lie in the argmax set of the convex potential", "entropic plan");
  }

  st.summary = {{"solver", to_string(cfg.solver)},
                {"source_atoms", mp.mu.size()},
                {"target_atoms", mp.nu.size()},
                {"spacing", mp.spacing},
                {"epsilon", tol.epsilon},
                {"suitable", cert.ok()},
                {"total_cost", sol.coupling.total_cost},
                {"dual_objective", dual},
                {"duality_gap", gap},
                {"marginal_violation", marg},
                {"cyclical_monotonicity_violation", cm},
                {"support_size", sol.coupling.entries.size()},
                {"extraction_support_size", st.support.entries.size()},
                {"iterations", sol.iterations}};
  return st;
}

struct ExtractStage {
  MultiMap mm;
  InverseMaps inv;
  BivalenceAudit audit;
  json regions;
  CheckTable checks{"extract"};
};

inline ExtractStage run_extract(const RunConfig& cfg, const MeasurePair& mp, const Coupling& support) {
  const auto tol = resolve_tolerances(cfg, mp.spacing);
  ExtractStage st;
  st.mm = classify_regions(extract_multimap(support, mp.mu, mp.nu, tol.merge_tol), tol.zero_tol);
  st.inv = invert_maps(st.mm, support, mp.mu, mp.nu);
  st.audit = audit_bivalence(st.mm, st.inv);
  const auto& a = st.audit;

  const auto s0 = st.mm.indices_in(SourceRegion::S0).size();
  const auto s1 = st.mm.indices_in(SourceRegion::S1).size();
  const auto s2 = st.mm.indices_in(SourceRegion::S2).size();
  const double total = static_cast<double>(st.mm.size());
  const auto [nu1, rest] = nu1_split(st.mm, mp.nu);
  const double mono = support_monotonicity_min(support, mp.mu, mp.nu);

  st.checks.at_most("every source atom has exactly one region label", static_cast<double>(st.mm.size() - s0 - s1 - s2),
                    0.0);
  if (a.s2_count == 0) {
    st.checks.skip("bivalent atoms have x.t+ > 0 > x.t- and lambda > 0", "no bivalent atoms");
    st.checks.skip("bivalent atoms: t+ - t- is normal to the sphere (residual <= 0.1 lambda)", "no bivalent atoms");
    st.checks.skip("t+ of bivalent atoms lands in T1", "no bivalent atoms");
    st.checks.skip("t+(S2) and t-(S2) are disjoint", "no bivalent atoms");
  } else {
    st.checks.at_most("bivalent atoms have x.t+ > 0 > x.t- and lambda > 0", static_cast<double>(a.sign_violations), 0.0);
    st.checks.at_most("bivalent atoms: t+ - t- is normal to the sphere (residual <= 0.1 lambda)",
                      a.max_residual_ratio, 0.1);
    st.checks.at_most("t+ of bivalent atoms lands in T1", static_cast<double>(a.plus_not_in_t1), 0.0);
    st.checks.at_most("t+(S2) and t-(S2) are disjoint", static_cast<double>(a.plus_minus_overlap), 0.0);
  }
  st.checks.at_most("lambda <= 2 on every atom", a.max_lambda, 2.0 + 1e-9);
  if (cfg.solver == SolverKind::Exact)
    st.checks.at_least("support pairs are monotone: (x_i - x_k).(y_j - y_l) >= 0", mono, -1e-9);
  else
    st.checks.skip("support pairs are monotone: (x_i - x_k).(y_j - y_l) >= 0", "entropic plan is not exactly optimal");

  auto count = [&](TargetRegion r) { return st.inv.indices_in(r).size(); };
  st.regions = {{"merge_tol", tol.merge_tol},
                {"zero_tol", tol.zero_tol},
                {"source", {{"S0", s0}, {"S1", s1}, {"S2", s2}}},
                {"source_fraction", {{"S0", s0 / total}, {"S1", s1 / total}, {"S2", s2 / total}}},
                {"target",
                 {{"T0", count(TargetRegion::T0)},
                  {"T1", count(TargetRegion::T1)},
                  {"T2", count(TargetRegion::T2)},
                  {"unsupported", count(TargetRegion::Unsupported)}}},
                {"anomalies", st.mm.anomalies.size()},
                {"bivalence",
                 {{"s2_count", a.s2_count},
                  {"sign_violations", a.sign_violations},
                  {"collinearity_violations", a.collinearity_violations},
                  {"plus_not_in_t1", a.plus_not_in_t1},
                  {"plus_minus_overlap", a.plus_minus_overlap},
                  {"max_lambda", a.max_lambda},
                  {"max_residual_ratio", a.max_residual_ratio}}},
                {"nu1_mass", nu1.mass},
                {"nu_rest_mass", rest.mass},
                {"support_monotonicity_min", mono}};
  return st;
}

struct DiagnoseStage {
  json holder;
  std::vector<DichotomyProbe> probes;
  CheckTable checks{"diagnose"};
};

namespace detail {
/// Keeps at most `limit` raw pairs, evenly strided, for plotting.
inline void thin_pairs(HolderReport& r, std::size_t limit) {
  if (r.log_pairs.size() <= limit) return;
  std::vector<std::pair<double, double>> out;
  out.reserve(limit);
  const double stride = static_cast<double>(r.log_pairs.size()) / static_cast<double>(limit);
  for (std::size_t k = 0; k < limit; ++k) out.push_back(r.log_pairs[static_cast<std::size_t>(k * stride)]);
  r.log_pairs = std::move(out);
}

inline std::optional<HolderReport> try_fit(const std::vector<HolderSample>& samples, const ScaleWindow& w,
                                           const std::string& label, std::string& why) {
  if (!w.resolvable()) {
    why = "scale window [" + format_number(w.r_min) + ", " + format_number(w.r_max) +
          "] spans less than an octave at this resolution";
    return std::nullopt;
  }
  try {
    auto r = holder_fit(samples, {}, w, label, true);
    thin_pairs(r, 20000);
    return r;
  } catch (const InsufficientData& e) {
    why = e.what();
    return std::nullopt;
  }
}
}  // namespace detail

inline DiagnoseStage run_diagnose(const RunConfig& cfg, const MeasurePair& mp, const ExtractStage& ex) {
  DiagnoseStage st;
  const auto& mm = ex.mm;
  const auto& inv = ex.inv;
  const int n = mm.n;
  const ScaleWindow window = ScaleWindow::for_spacing(mp.spacing);
  const double alpha_min = holder_exponent(n) - 0.05;
  json reports = json::array();
  std::string why;

  std::vector<std::size_t> s1_far;
  for (std::size_t i : mm.indices_in(SourceRegion::S1))
    if (std::abs(mm[i].x.dot(mm[i].t_plus)) >= cfg.holder_min_alignment) s1_far.push_back(i);
  const std::string s1_claim = "t+ Holder exponent on S1 away from S0 >= 1/(4n-1) - 0.05";
  if (auto r = detail::try_fit(map_samples(mm, s1_far, MapBranch::Plus), window, "S1", why)) {
    if (r->degenerate)
      st.checks.skip(s1_claim, "t+ is constant on the samples");
    else
      st.checks.at_least(s1_claim, r->alpha_hat, alpha_min,
                         r->low_confidence ? "low confidence: fewer than 30 pairs" : "");
    reports.push_back(holder_report_to_json(*r));
  } else {
    st.checks.skip(s1_claim, why);
  }

  const auto S2 = mm.indices_in(SourceRegion::S2);
  for (auto [branch, label] : {std::pair{MapBranch::Plus, "S2 t+"}, std::pair{MapBranch::Minus, "S2 t-"}})
    if (auto r = detail::try_fit(map_samples(mm, S2, branch), window, label, why))
      reports.push_back(holder_report_to_json(*r));

  json constants = nullptr;
  json bounds = json::object();
  const std::string tminus_claim = "t- Holder bound on S2 with constant (1 + 2/k_U)(C+ + 2)";
  const std::string converse_claim = "t+ Holder bound on S2 with t+ and t- exchanged";
  const std::string segment_claim = "x_i . grad h(u) > k_U/2 along segments between close t- images";
  if (S2.size() < 2) {
    st.checks.skip(tminus_claim, "fewer than 2 bivalent atoms");
    st.checks.skip(converse_claim, "fewer than 2 bivalent atoms");
    st.checks.skip(segment_claim, "fewer than 2 bivalent atoms");
  } else {
    try {
      const auto rc = region_constants(mm, S2, window);
      constants = region_constants_to_json(rc);
      try {
        const double ratio = t_minus_bound_check(mm, S2, window);
        bounds["t_minus_ratio"] = ratio;
        st.checks.at_most(tminus_claim, ratio, 1.0);
      } catch (const InsufficientData& e) {
        st.checks.skip(tminus_claim, e.what());
      }
      try {
        const double ratio = t_minus_bound_check(mm, S2, window, true);
        bounds["converse_ratio"] = ratio;
        st.checks.at_most(converse_claim, ratio, 1.0);
      } catch (const InsufficientData& e) {
        st.checks.skip(converse_claim, e.what());
      }
      double worst = std::numeric_limits<double>::infinity();
      std::size_t tested = 0;
      for (std::size_t a = 0; a < S2.size(); ++a)
        for (std::size_t b = a + 1; b < S2.size(); ++b) {
          const auto& p = mm[S2[a]];
          const auto& q = mm[S2[b]];
          if ((p.x.coords() - q.x.coords()).norm() > window.r_max) continue;
          if ((p.t_minus.coords() - q.t_minus.coords()).squaredNorm() >= 0.5 * rc.k_U) continue;
          const auto r = segment_normal_check(mm, S2[a], S2[b], rc.k_U);
          worst = std::min(worst, r.min_projection);
          ++tested;
        }
      bounds["segment_pairs"] = tested;
      bounds["segment_min_projection"] = number(worst);
      if (tested == 0)
        st.checks.skip(segment_claim, "no close pairs");
      else
        st.checks.greater(segment_claim, worst, 0.5 * rc.k_U);
    } catch (const DomainError& e) {
      st.checks.fail(tminus_claim, e.what());
    }
  }

  const auto T2 = inv.indices_in(TargetRegion::T2);
  json target = json::object();
  const std::string mono_claim = "s- is monotone on T2: (s-(y1) - s-(y0)).(y1 - y0) >= 0";
  const std::string beta_claim = "beta(y0, y1) < (pi - gamma)/2 on T2 pairs";
  const std::string inj_claim = "s- injectivity ratio on T2 >= 1/C_minus";
  if (T2.size() < 2) {
    st.checks.skip(mono_claim, "fewer than 2 T2 atoms");
    st.checks.skip(beta_claim, "fewer than 2 T2 atoms");
    st.checks.skip(inj_claim, "fewer than 2 T2 atoms");
  } else {
    const double mono = monotonicity_check(inv, T2);
    target["monotonicity_min"] = mono;
    st.checks.at_least(mono_claim, mono, -1e-9);

    bool gamma_ok = true;
    double worst_slack = std::numeric_limits<double>::infinity();
    json k_values = json::array();
    for (std::size_t j : T2) {
      auto probe = dichotomy_probe(inv, j, cfg.dichotomy_m);
      gamma_ok &= probe.gamma_bound_ok;
      for (const auto& b : probe.betas) worst_slack = std::min(worst_slack, 0.5 * (M_PI - b.gamma) - b.beta);
      k_values.push_back({{"y1", j}, {"members", probe.members.size()}, {"K", number(probe.K)}});
      st.probes.push_back(std::move(probe));
    }
    target["dichotomy"] = {{"m", cfg.dichotomy_m}, {"gamma_bound_ok", gamma_ok}, {"probes", std::move(k_values)}};
    st.checks.greater(beta_claim, worst_slack, -1e-9, "value is min of (pi - gamma)/2 - beta");

    try {
      const auto ib = injectivity_lower_bound(inv, T2, 4.0 * n - 1.0, window.r_max);
      target["injectivity"] = {{"exponent", 4 * n - 1},
                               {"min_ratio_minus", number(ib.min_ratio_minus)},
                               {"pairs_minus", ib.pairs_minus},
                               {"min_ratio_plus", number(ib.min_ratio_plus)},
                               {"pairs_plus", ib.pairs_plus}};
      if (!constants.is_null() && ib.pairs_minus > 0)
        st.checks.at_least(inj_claim, ib.min_ratio_minus, 1.0 / constants["C_minus_proof"].get<double>());
      else
        st.checks.skip(inj_claim, "no region constants or no distinct s- pairs");
    } catch (const InsufficientData& e) {
      st.checks.skip(inj_claim, e.what());
    }
  }

  st.holder = {{"scale_window", {window.r_min, window.r_max}},
               {"exponent", holder_exponent(n)},
               {"reports", std::move(reports)},
               {"region_constants", std::move(constants)},
               {"bounds", std::move(bounds)},
               {"target", std::move(target)}};
  return st;
}

struct MtwStage {
  std::vector<ConditionReport> reports;
  CheckTable checks{"mtw"};
};

inline MtwStage run_mtw(int n, std::uint64_t seed, int null_pairs) {
  MtwSuiteConfig mc;
  mc.n = n;
  mc.seed = static_cast<unsigned>(seed);
  mc.null_pairs = null_pairs;
  MtwStage st;
  st.reports = run_mtw_suite(mc);
  for (const auto& r : st.reports) {
    switch (r.condition) {
      case Condition::Twist:
        st.checks.at_most("twist: Y -> -Dc(x, Y) doubles distances (|ratio - 2|)", std::abs(r.min_margin - 2.0), 1e-10);
        break;
      case Condition::Nondegeneracy:
        st.checks.greater("nondegeneracy: min |det DDc| for x.y >= 0.05", r.min_margin, 0.0);
        break;
      case Condition::CrossCurvature:
        if (r.vacuous)
          st.checks.skip("cross-curvature > 0 on null pairs with x.y >= 0.3", r.note);
        else
          st.checks.greater("cross-curvature > 0 on null pairs with x.y >= 0.3", r.min_margin, 0.0);
        break;
      case Condition::Biconvexity:
        st.checks.at_most("bi-convexity witness matches the convex combination", -r.min_margin,
                          kBiconvexityTolerance);
        break;
    }
  }
  return st;
}

// ---- run directory -----------------------------------------------------------

inline json config_to_json(const RunConfig& cfg, const Tolerances& tol, const std::string& mu_spec,
                           const std::string& nu_spec) {
  return {{"n", cfg.n},
          {"mesh_count", cfg.mesh_count},
          {"seed", cfg.seed},
          {"solver", to_string(cfg.solver)},
          {"reg", cfg.reg},
          {"epsilon_suitable", tol.epsilon},
          {"merge_tol", tol.merge_tol},
          {"zero_tol", tol.zero_tol},
          {"dichotomy_m", cfg.dichotomy_m},
          {"holder_min_alignment", cfg.holder_min_alignment},
          {"mu", mu_spec},
          {"nu", nu_spec}};
}

/// Reads the settings a later stage needs back from run.json.
inline RunConfig config_from_run(const std::filesystem::path& dir) {
  const json j = read_json(dir / "run.json");
  RunConfig cfg;
  try {
    cfg.n = j.at("n").get<int>();
    cfg.mesh_count = j.at("mesh_count").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.solver = parse_solver(j.at("solver").get<std::string>());
    cfg.reg = j.at("reg").get<double>();
    cfg.epsilon_suitable = j.at("epsilon_suitable").get<double>();
    cfg.merge_tol = j.at("merge_tol").get<double>();
    cfg.zero_tol = j.at("zero_tol").get<double>();
    cfg.dichotomy_m = j.at("dichotomy_m").get<int>();
    cfg.holder_min_alignment = j.at("holder_min_alignment").get<double>();
  } catch (const json::exception& e) {
    throw IOError("run.json: " + std::string(e.what()));
  }
  cfg.output_dir = dir;
  return cfg;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IOError("cannot create output directory " + dir.string());
}

inline void require_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IOError("run directory " + dir.string() + " does not exist");
}

inline MeasurePair load_run_measures(const std::filesystem::path& dir) {
  MeasurePair p{load_measure(dir / "mu.json"), load_measure(dir / "nu.json"), 0.0};
  p.spacing = std::max(detail::mean_nearest_neighbour(p.mu.points()), detail::mean_nearest_neighbour(p.nu.points()));
  return p;
}

inline void write_solve(const std::filesystem::path& dir, const MeasurePair& mp, const SolveStage& st) {
  save_measure(dir / "mu.json", mp.mu);
  save_measure(dir / "nu.json", mp.nu);
  save_coupling(dir / "coupling.csv", st.solution.coupling);
  if (st.support.entries.size() != st.solution.coupling.entries.size())
    save_coupling(dir / "support.csv", st.support);
  write_json(dir / "duals.json", duals_to_json(st.solution.duals, st.solution.coupling.total_cost));
  write_json(dir / "solve.json", st.summary);
  write_json(dir / "checks_solve.json", checks_to_json(st.checks));
}

inline void write_extract(const std::filesystem::path& dir, const ExtractStage& st) {
  write_json(dir / "multimap.json", multimap_to_json(st.mm));
  write_json(dir / "inverse.json", inverse_maps_to_json(st.inv));
  write_json(dir / "regions.json", st.regions);
  write_json(dir / "checks_extract.json", checks_to_json(st.checks));
}

inline void write_diagnose(const std::filesystem::path& dir, const DiagnoseStage& st) {
  write_json(dir / "holder.json", st.holder);
  write_text(dir / "beta.csv", beta_csv(st.probes));
  write_json(dir / "checks_diagnose.json", checks_to_json(st.checks));
}

inline void write_mtw(const std::filesystem::path& dir, const MtwStage& st) {
  json a = json::array();
  for (const auto& r : st.reports) a.push_back(condition_report_to_json(r));
  write_json(dir / "mtw.json", a);
  write_json(dir / "checks_mtw.json", checks_to_json(st.checks));
}

/// Coupling for extraction in an existing run directory: the pruned support
/// when one was written, the full plan otherwise.
inline Coupling load_run_support(const std::filesystem::path& dir, const MeasurePair& mp) {
  const auto path = std::filesystem::exists(dir / "support.csv") ? dir / "support.csv" : dir / "coupling.csv";
  return load_coupling(path, mp.mu.size(), mp.nu.size());
}

struct PipelineResult {
  CheckTable checks;
  json regions;
};

/// Runs every stage and writes all artifacts to cfg.output_dir. Solver and
/// extraction failures propagate as exceptions; failed checks are recorded
/// in the table (see PipelineResult::checks.all_pass()).
inline PipelineResult run_pipeline(const RunConfig& cfg, const std::string& mu_spec, const std::string& nu_spec) {
  const MeasurePair mp = prepare_measures(cfg, mu_spec, nu_spec);
  ensure_dir(cfg.output_dir);
  const auto tol = resolve_tolerances(cfg, mp.spacing);
  write_json(cfg.output_dir / "run.json", config_to_json(cfg, tol, mu_spec, nu_spec));

  const SolveStage solve = run_solve(cfg, mp);
  write_solve(cfg.output_dir, mp, solve);
  const ExtractStage ex = run_extract(cfg, mp, solve.support);
  write_extract(cfg.output_dir, ex);
  const DiagnoseStage dg = run_diagnose(cfg, mp, ex);
  write_diagnose(cfg.output_dir, dg);
  const MtwStage mtw = run_mtw(cfg.n, cfg.seed, cfg.mtw_null_pairs);
  write_mtw(cfg.output_dir, mtw);

  PipelineResult out;
  out.checks.append(solve.checks);
  out.checks.append(ex.checks);
  out.checks.append(dg.checks);
  out.checks.append(mtw.checks);
  out.regions = ex.regions;
  return out;
}

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw ConfigError("unknown report format '" + s + "' (expected json or csv)");
}

/// Collects the check tables present in a run directory, in stage order.
inline CheckTable collect_checks(const std::filesystem::path& dir) {
  require_dir(dir);
  CheckTable all;
  bool any = false;
  for (const char* stage : {"solve", "extract", "diagnose", "mtw"}) {
    const auto path = dir / (std::string("checks_") + stage + ".json");
    if (!std::filesystem::exists(path)) continue;
    any = true;
    try {
      all.append(checks_from_json(read_json(path)));
    } catch (const json::exception& e) {
      throw IOError(path.string() + ": " + e.what());
    }
  }
  if (!any) throw IOError("no check tables in " + dir.string());
  return all;
}

inline std::string checks_csv(const CheckTable& t) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::string out = "stage,claim,value,relation,threshold,status,note\n";
  for (const auto& l : t.lines())
    out += l.stage + "," + quote(l.claim) + "," + format_number(l.value) + "," + l.relation + "," +
           format_number(l.threshold) + "," + to_string(l.status) + "," + quote(l.note) + "\n";
  return out;
}

/// Writes the pass/fail table of a run as report.json or report.csv and
/// returns the path written.
inline std::filesystem::path export_report(const std::filesystem::path& dir, ReportFormat format) {
  const CheckTable t = collect_checks(dir);
  if (format == ReportFormat::Json) {
    const auto path = dir / "report.json";
    write_json(path, {{"all_pass", t.all_pass()}, {"checks", checks_to_json(t)}});
    return path;
  }
  const auto path = dir / "report.csv";
  write_text(path, checks_csv(t));
  return path;
}

}  // namespace sphereot
