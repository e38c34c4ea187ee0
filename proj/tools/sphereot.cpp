// sphereot: command-line front end for the sphere transport laboratory.
//
//   sphereot gen      --n 2 --mesh 500 --density cap:0.9 --out mu.json
//   sphereot solve    --n 2 --mesh 500 --mu cap:0.9 --nu uniform --out run/
//   sphereot extract  --dir run/ [--merge-tol T] [--zero-tol T]
//   sphereot diagnose --dir run/
//   sphereot mtw      --n 2 --out run/
//   sphereot report   --dir run/ --format csv
//
// Exit codes: 0 ok, 1 configuration, 2 invariant violation, 3 solver, 4 IO.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sphereot/sphereot.hpp"

namespace {

using namespace sphereot;

enum Exit { kOk = 0, kConfig = 1, kInvariant = 2, kSolver = 3, kIO = 4 };

void print_checks(const CheckTable& t) {
  for (const auto& l : t.lines()) {
    std::cout << to_string(l.status) << "  [" << l.stage << "] " << l.claim;
    if (l.status != CheckStatus::Skip) std::cout << ": " << format_number(l.value) << " " << l.relation << " " << format_number(l.threshold);
    if (!l.note.empty()) std::cout << " (" << l.note << ")";
    std::cout << "\n";
  }
}

int status_of(const CheckTable& t) { return t.all_pass() ? kOk : kInvariant; }

void print_regions(const json& r) {
  const auto& s = r.at("source");
  const auto& t = r.at("target");
  std::cout << "regions: S0=" << s.at("S0") << " S1=" << s.at("S1") << " S2=" << s.at("S2") << "  T0=" << t.at("T0")
            << " T1=" << t.at("T1") << " T2=" << t.at("T2") << "  (S2 fraction "
            << format_number(r.at("source_fraction").at("S2").get<double>()) << ")\n";
}

struct Options {
  RunConfig cfg;
  double epsilon = 0.0, merge_tol = 0.0, zero_tol = 0.0;
  std::string solver = "exact";
  std::string mu = "uniform", nu = "uniform", density = "uniform";
  std::string out, dir, format = "json";

  void apply() {
    cfg.solver = parse_solver(solver);
    if (epsilon != 0.0) cfg.epsilon_suitable = epsilon;
    if (merge_tol != 0.0) cfg.merge_tol = merge_tol;
    if (zero_tol != 0.0) cfg.zero_tol = zero_tol;
  }
};

void add_run_flags(CLI::App* app, Options& o) {
  app->add_option("--n", o.cfg.n, "sphere dimension")->capture_default_str();
  app->add_option("--mesh", o.cfg.mesh_count, "mesh atoms per measure")->capture_default_str();
  app->add_option("--seed", o.cfg.seed, "mesh seed")->capture_default_str();
}

void add_tolerance_flags(CLI::App* app, Options& o) {
  app->add_option("--merge-tol", o.merge_tol, "image clustering radius (default 3 x spacing)");
  app->add_option("--zero-tol", o.zero_tol, "half-width of the S0 band (default spacing)");
}

int run_gen(Options& o) {
  o.apply();
  o.cfg.validate();
  const Mesh mesh = quasi_uniform_mesh(o.cfg.n, o.cfg.mesh_count, o.cfg.seed);
  const Density d = [&] {
    try {
      return builtin_density(o.density);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }();
  save_measure(o.out, sample_density(d, mesh));
  std::cout << "wrote " << o.out << " (" << mesh.size() << " atoms, spacing " << format_number(mesh.spacing) << ")\n";
  return kOk;
}

int run_solve(Options& o) {
  o.apply();
  o.cfg.output_dir = o.out;
  const auto result = run_pipeline(o.cfg, o.mu, o.nu);
  export_report(o.cfg.output_dir, ReportFormat::Json);
  export_report(o.cfg.output_dir, ReportFormat::Csv);
  print_regions(result.regions);
  print_checks(result.checks);
  return status_of(result.checks);
}

int run_extract_cmd(Options& o) {
  require_dir(o.dir);
  RunConfig cfg = config_from_run(o.dir);
  if (o.merge_tol != 0.0) cfg.merge_tol = o.merge_tol;
  if (o.zero_tol != 0.0) cfg.zero_tol = o.zero_tol;
  cfg.validate();
  const MeasurePair mp = load_run_measures(o.dir);
  const auto st = run_extract(cfg, mp, load_run_support(o.dir, mp));
  write_extract(o.dir, st);
  print_regions(st.regions);
  print_checks(st.checks);
  return status_of(st.checks);
}

int run_diagnose_cmd(Options& o) {
  require_dir(o.dir);
  RunConfig cfg = config_from_run(o.dir);
  if (o.cfg.dichotomy_m != RunConfig{}.dichotomy_m) cfg.dichotomy_m = o.cfg.dichotomy_m;
  cfg.validate();
  const MeasurePair mp = load_run_measures(o.dir);
  const auto ex = run_extract(cfg, mp, load_run_support(o.dir, mp));
  const auto st = run_diagnose(cfg, mp, ex);
  write_diagnose(o.dir, st);
  print_checks(st.checks);
  return status_of(st.checks);
}

int run_mtw_cmd(Options& o) {
  o.apply();
  if (o.cfg.n < 1) throw ConfigError("n must be at least 1");
  if (o.cfg.mtw_null_pairs < 0) throw ConfigError("null pair count must be nonnegative");
  ensure_dir(o.out);
  const auto st = run_mtw(o.cfg.n, o.cfg.seed, o.cfg.mtw_null_pairs);
  write_mtw(o.out, st);
  print_checks(st.checks);
  return status_of(st.checks);
}

int run_report(Options& o) {
  const auto format = parse_format(o.format);
  const auto path = export_report(o.dir, format);
  const auto checks = collect_checks(o.dir);
  print_checks(checks);
  std::cout << "wrote " << path.string() << "\n";
  return status_of(checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport between measures on spheres: solve, extract the two-valued map, check regularity."};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "sample a built-in density on a quasi-uniform mesh");
  add_run_flags(gen, o);
  gen->add_option("--density", o.density, "uniform | cap:k | band:k")->capture_default_str();
  gen->add_option("--out", o.out, "output measure JSON")->required();

  auto* solve = app.add_subcommand("solve", "run the full pipeline into a run directory");
  add_run_flags(solve, o);
  add_tolerance_flags(solve, o);
  solve->add_option("--mu", o.mu, "source: built-in density or measure JSON")->capture_default_str();
  solve->add_option("--nu", o.nu, "target: built-in density or measure JSON")->capture_default_str();
  solve->add_option("--solver", o.solver, "exact | entropic")->capture_default_str();
  solve->add_option("--reg", o.cfg.reg, "entropic regularization")->capture_default_str();
  solve->add_option("--epsilon", o.epsilon, "suitability constant (default 0.05 / area)");
  solve->add_option("--dichotomy-m", o.cfg.dichotomy_m, "m of the Theta_m probe")->capture_default_str();
  solve->add_option("--null-pairs", o.cfg.mtw_null_pairs, "null pairs for the cross-curvature check")
      ->capture_default_str();
  solve->add_option("--out", o.out, "run directory")->required();

  auto* extract = app.add_subcommand("extract", "re-extract maps and regions from a run directory");
  extract->add_option("--dir", o.dir, "run directory")->required();
  add_tolerance_flags(extract, o);

  auto* diagnose = app.add_subcommand("diagnose", "Holder fits and quantitative checks on a run directory");
  diagnose->add_option("--dir", o.dir, "run directory")->required();
  diagnose->add_option("--dichotomy-m", o.cfg.dichotomy_m, "m of the Theta_m probe")->capture_default_str();

  auto* mtw = app.add_subcommand("mtw", "check twist, nondegeneracy, cross-curvature and bi-convexity");
  mtw->add_option("--n", o.cfg.n, "sphere dimension")->capture_default_str();
  mtw->add_option("--seed", o.cfg.seed, "sampling seed")->capture_default_str();
  mtw->add_option("--null-pairs", o.cfg.mtw_null_pairs, "null pairs")->capture_default_str();
  mtw->add_option("--out", o.out, "output directory")->required();

  auto* report = app.add_subcommand("report", "write the pass/fail table of a run");
  report->add_option("--dir", o.dir, "run directory")->required();
  report->add_option("--format", o.format, "json | csv")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) return run_gen(o);
    if (*solve) return run_solve(o);
    if (*extract) return run_extract_cmd(o);
    if (*diagnose) return run_diagnose_cmd(o);
    if (*mtw) return run_mtw_cmd(o);
    if (*report) return run_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const IOError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIO;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const sphereot::Error& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvariant;
  }
  return kConfig;
}
