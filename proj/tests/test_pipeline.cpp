#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sphereot/pipeline.hpp"

using namespace sphereot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sphereot_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_run(const fs::path& dir, int count = 200) {
  RunConfig cfg;
  cfg.mesh_count = count;
  cfg.mtw_null_pairs = 100;
  cfg.output_dir = dir;
  return cfg;
}

std::string failures(const CheckTable& t) {
  std::string out;
  for (const auto& l : t.lines())
    if (l.status == CheckStatus::Fail) out += l.stage + ": " + l.claim + " (" + l.note + ")\n";
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST(RunConfig, Validation) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.mesh_count = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.mesh_count = 4;
  EXPECT_NO_THROW(cfg.validate());
  cfg.merge_tol = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.merge_tol.reset();
  cfg.zero_tol = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.zero_tol.reset();
  cfg.dichotomy_m = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_solver("simplex"), ConfigError);
  EXPECT_EQ(parse_solver("entropic"), SolverKind::Entropic);
  EXPECT_THROW(parse_format("xml"), ConfigError);
}

TEST(PrepareMeasures, BadSpecsAreConfigErrors) {
  RunConfig cfg;
  cfg.mesh_count = 50;
  EXPECT_THROW(prepare_measures(cfg, "cap:2", "uniform"), ConfigError);
  EXPECT_THROW(prepare_measures(cfg, "uniform", "blob"), ConfigError);
  EXPECT_THROW(prepare_measures(cfg, "missing.json", "uniform"), IOError);
  const auto mp = prepare_measures(cfg, "cap:0.5", "uniform");
  EXPECT_EQ(mp.mu.size(), 50u);
  EXPECT_GT(mp.spacing, 0.0);
}

TEST(Io, MeasureRoundTripIsExact) {
  const auto dir = scratch("measure");
  fs::create_directories(dir);
  for (int n : {1, 2, 3}) {
    const auto m = sample_density(builtin_density("band:0.3"), quasi_uniform_mesh(n, 77, 5));
    save_measure(dir / "m.json", m);
    const auto back = load_measure(dir / "m.json");
    ASSERT_EQ(back.size(), m.size());
    EXPECT_EQ(back.dim(), n);
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_EQ(back.point(i).coords(), m.point(i).coords());
      EXPECT_EQ(back.weight(i), m.weight(i));
      EXPECT_EQ(back.cell_areas()[i], m.cell_areas()[i]);
    }
  }
}

TEST(Io, MalformedFiles) {
  const auto dir = scratch("malformed");
  fs::create_directories(dir);
  EXPECT_THROW(load_measure(dir / "none.json"), IOError);
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_measure(dir / "bad.json"), IOError);
  write_text(dir / "shape.json", R"({"n": 2, "atoms": [{"p": [0, 0, 1]}]})");
  EXPECT_THROW(load_measure(dir / "shape.json"), IOError);
  write_text(dir / "mass.json",
             R"({"n": 2, "atoms": [{"p": [0, 0, 1], "w": 0.5, "a": 1}, {"p": [1, 0, 0], "w": 0.6, "a": 1}]})");
  EXPECT_THROW(load_measure(dir / "mass.json"), DomainError);
  write_text(dir / "c.csv", "i,j,mass\n0,5,0.5\n");
  EXPECT_THROW(load_coupling(dir / "c.csv", 2, 2), IOError);
  EXPECT_THROW(write_text(dir / "no" / "such" / "dir" / "x.txt", "x"), IOError);
}

TEST(Io, CouplingRoundTrip) {
  const auto dir = scratch("coupling");
  fs::create_directories(dir);
  const Coupling c{3, 2, {{0, 1, 0.1}, {1, 0, 1.0 / 3.0}, {2, 1, 0.2 + 1e-17}}, 0.0};
  save_coupling(dir / "c.csv", c);
  EXPECT_EQ(read_text(dir / "c.csv").substr(0, 9), "i,j,mass\n");
  const auto back = load_coupling(dir / "c.csv", 3, 2);
  ASSERT_EQ(back.entries.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.entries[k].i, c.entries[k].i);
    EXPECT_EQ(back.entries[k].j, c.entries[k].j);
    EXPECT_EQ(back.entries[k].mass, c.entries[k].mass);
  }
}

TEST(Checks, JsonRoundTrip) {
  CheckTable t("demo");
  t.at_most("a \"quoted\" claim", 0.5, 1.0);
  t.at_least("b", -1.0, 0.0, "note, with comma");
  t.skip("c", "why");
  EXPECT_FALSE(t.all_pass());
  const auto back = checks_from_json(checks_to_json(t));
  ASSERT_EQ(back.lines().size(), 3u);
  EXPECT_EQ(back.lines()[0].claim, "a \"quoted\" claim");
  EXPECT_EQ(back.lines()[1].status, CheckStatus::Fail);
  EXPECT_EQ(back.lines()[2].status, CheckStatus::Skip);
  EXPECT_TRUE(std::isnan(back.lines()[2].value));
  EXPECT_EQ(checks_to_json(back).dump(), checks_to_json(t).dump());
}

TEST(Pipeline, IdentityRunIsAllS1) {
  const auto dir = scratch("identity");
  auto cfg = small_run(dir);
  const auto res = run_pipeline(cfg, "uniform", "uniform");
  EXPECT_TRUE(res.checks.all_pass()) << failures(res.checks);
  EXPECT_EQ(res.regions["source"]["S1"].get<std::size_t>(), 200u);
  EXPECT_EQ(res.regions["source"]["S2"].get<std::size_t>(), 0u);
  const auto solve = read_json(dir / "solve.json");
  EXPECT_LE(solve["total_cost"].get<double>(), 1e-10);
}

TEST(Pipeline, BivalentRunReportsS2) {
  const auto dir = scratch("bivalent");
  const auto res = run_pipeline(small_run(dir), "cap:0.9", "uniform");
  EXPECT_TRUE(res.checks.all_pass()) << failures(res.checks);
  EXPECT_GT(res.regions["source_fraction"]["S2"].get<double>(), 0.0);
  for (const char* f : {"run.json", "mu.json", "nu.json", "coupling.csv", "duals.json", "solve.json", "multimap.json",
                        "inverse.json", "regions.json", "holder.json", "beta.csv", "mtw.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Pipeline, EntropicRunCompletes) {
  const auto dir = scratch("entropic");
  auto cfg = small_run(dir, 120);
  cfg.solver = SolverKind::Entropic;
  const auto res = run_pipeline(cfg, "cap:0.5", "uniform");
  EXPECT_TRUE(res.checks.all_pass()) << failures(res.checks);
  const auto skipped = std::count_if(res.checks.lines().begin(), res.checks.lines().end(),
                                     [](const CheckLine& l) { return l.status == CheckStatus::Skip; });
  EXPECT_GE(skipped, 3);
}

TEST(Pipeline, SameSeedGivesIdenticalArtifacts) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_pipeline(small_run(a), "cap:0.9", "band:0.5");
  run_pipeline(small_run(b), "cap:0.9", "band:0.5");
  export_report(a, ReportFormat::Json);
  export_report(b, ReportFormat::Json);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    EXPECT_EQ(read_text(e.path()), read_text(b / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 15u);
}

TEST(Report, JsonAndCsvCarryTheSameNumbers) {
  const auto dir = scratch("report");
  run_pipeline(small_run(dir), "cap:0.9", "uniform");
  const auto jpath = export_report(dir, ReportFormat::Json);
  const auto cpath = export_report(dir, ReportFormat::Csv);
  const auto j = read_json(jpath);
  std::istringstream csv(read_text(cpath));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "stage,claim,value,relation,threshold,status,note");
  std::size_t k = 0;
  while (std::getline(csv, line)) {
    const auto f = split_csv_line(line);
    ASSERT_EQ(f.size(), 7u) << line;
    const auto& row = j["checks"].at(k++);
    EXPECT_EQ(f[0], row["stage"].get<std::string>());
    EXPECT_EQ(f[1], row["claim"].get<std::string>());
    const double jv = row["value"].is_null() ? std::nan("") : row["value"].get<double>();
    EXPECT_EQ(f[2], format_number(jv));
    if (std::isfinite(jv)) EXPECT_EQ(std::stod(f[2]), jv);
    EXPECT_EQ(f[5], row["status"].get<std::string>());
  }
  EXPECT_EQ(k, j["checks"].size());
  EXPECT_TRUE(j["all_pass"].get<bool>());
}

TEST(Report, MissingDirectoryIsIOError) {
  EXPECT_THROW(export_report(scratch("missing"), ReportFormat::Json), IOError);
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  EXPECT_THROW(collect_checks(dir), IOError);
  // An output path below a regular file cannot be created.
  write_text(dir / "file", "x");
  EXPECT_THROW(ensure_dir(dir / "file" / "run"), IOError);
}

TEST(Stages, RerunFromDirectory) {
  const auto dir = scratch("rerun");
  run_pipeline(small_run(dir), "cap:0.9", "uniform");
  const auto cfg = config_from_run(dir);
  const auto mp = load_run_measures(dir);
  const auto ex = run_extract(cfg, mp, load_run_support(dir, mp));
  EXPECT_EQ(ex.regions.dump(), read_json(dir / "regions.json").dump());
  auto tight = cfg;
  tight.merge_tol = 1e-6;
  EXPECT_THROW(run_extract(tight, mp, load_run_support(dir, mp)), ExtractionError);
}
