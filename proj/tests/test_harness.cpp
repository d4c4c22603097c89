#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rpg/errors.hpp"
#include "rpg/harness.hpp"

namespace fs = std::filesystem;
using namespace rpg::harness;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rpg_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::size_t count_fields(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

rpg::ErrorKind config_error_kind(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const rpg::Error& e) {
    return e.kind();
  }
  return rpg::ErrorKind::IoError;  // sentinel: nothing thrown
}

// Small and quick: n = 10, p = 2, m = 10.
ExperimentConfig tiny_config(const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.n_values = {10};
  cfg.p_values = {2};
  cfg.m_values = {10};
  cfg.lambda_values = {0.5};
  cfg.output_dir = dir.string();
  cfg.timing = Timing::None;
  return cfg;
}

int cli(std::vector<const char*> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "rpg_cli");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_main(static_cast<int>(args.size()), args.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("config: defaults and a full document") {
  const ExperimentConfig d = parse_config("variant: oblique\n");
  CHECK(d.n_values == std::vector<Eigen::Index>{32});
  CHECK(d.repetitions == 1);
  CHECK(d.solvers == std::vector<std::string>{"rpg", "varpg", "parpg"});
  CHECK(d.timing == Timing::Wall);

  const ExperimentConfig c = parse_config(R"(
variant: stiefel
data: synthetic
noise_variance: 0.5
grid:
  n: [32, 64]
  p: 4
  m: [20, 40]
  lambda: [1.0, 2.0, 3.0]
repetitions: 3
seed: 99
solvers: [rpg, parpg]
solver_config:
  all: {max_iterations: 500}
  parpg: {interval_max: 7, tau: 1.5, check_estimate_bound: true}
output_dir: out
traces: true
timing: none
workers: 3
)");
  CHECK(c.variant == rpg::spca::Variant::StiefelScotlass);
  CHECK(c.data == DataKind::Synthetic);
  CHECK(c.noise_variance == 0.5);
  CHECK(c.cell_count() == 12);
  CHECK(c.repetitions == 3);
  CHECK(c.seed == 99);
  CHECK(c.solvers == std::vector<std::string>{"rpg", "parpg"});
  CHECK(c.overrides.at("all").max_iterations == 500);
  CHECK(c.overrides.at("parpg").interval_max == 7);
  CHECK(c.overrides.at("parpg").tau == 1.5);
  CHECK(c.overrides.at("parpg").check_estimate_bound == true);
  CHECK(!c.overrides.at("parpg").sigma.has_value());
  CHECK(c.output_dir == "out");
  CHECK(c.write_traces);
  CHECK(c.timing == Timing::None);
  CHECK(c.workers == 3);
}

TEST_CASE("config: bad documents raise ConfigError") {
  using rpg::ErrorKind;
  CHECK(config_error_kind("") == ErrorKind::ConfigError);
  CHECK(config_error_kind("variant: [oblique") == ErrorKind::ConfigError);
  CHECK(config_error_kind("variant: circle\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("colour: red\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("grid: {q: 3}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("grid: {n: []}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("grid: {n: abc}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("repetitions: 0\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("solvers: [rpg, newton]\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("solvers: [rpg, rpg]\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("solvers: []\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("grid: {n: 8, p: 9, m: 20}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("grid: {lambda: -1}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("data: synthetic\ngrid: {m: 21}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("timing: cpu\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("workers: 0\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("solver_config: {newton: {tau: 2}}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("solver_config: {all: {step: 2}}\n") == ErrorKind::ConfigError);
  CHECK(config_error_kind("variant: oblique\n") == ErrorKind::IoError);
}

TEST_CASE("config: a missing file is a ConfigError") {
  try {
    load_config("/nonexistent/experiment.yaml");
    FAIL("no exception");
  } catch (const rpg::Error& e) {
    CHECK(e.kind() == rpg::ErrorKind::ConfigError);
  }
}

TEST_CASE("config: shipped example files parse") {
  for (const auto& entry : fs::directory_iterator(fs::path(RPG_SOURCE_DIR) / "configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string()));
  }
}

TEST_CASE("grid expansion is row-major over (n, p, m, lambda)") {
  ExperimentConfig cfg;
  cfg.n_values = {8, 16};
  cfg.p_values = {1, 2};
  cfg.m_values = {10};
  cfg.lambda_values = {0.5, 1.0};
  const auto cells = expand_grid(cfg);
  REQUIRE(cells.size() == 8);
  CHECK(cells[0].n == 8);
  CHECK(cells[0].p == 1);
  CHECK(cells[0].lambda == 0.5);
  CHECK(cells[1].lambda == 1.0);
  CHECK(cells[2].p == 2);
  CHECK(cells[4].n == 16);
  CHECK(cells[7].n == 16);
  CHECK(cells[7].p == 2);
  CHECK(cells[7].lambda == 1.0);
}

TEST_CASE("report rows: fixed columns, NA seconds without timing") {
  ReportRow r;
  r.variant = "oblique";
  r.cell = {32, 4, 20, 2.0};
  r.seed = 17;
  r.solver = "parpg";
  r.iterations = 12;
  r.final_value = 0.1;
  r.sparsity = 0.25;
  r.seconds = 1.5;
  r.termination = "TargetValue";
  CHECK(format_report_row(r, Timing::Wall) == "oblique,32,4,20,2,17,parpg,12,0.1,0.25,1.5,TargetValue");
  CHECK(format_report_row(r, Timing::None) == "oblique,32,4,20,2,17,parpg,12,0.1,0.25,NA,TargetValue");
  CHECK(count_fields(kReportHeader) == count_fields(format_report_row(r, Timing::Wall)));
}

TEST_CASE("worker count: environment override") {
  ExperimentConfig cfg;
  cfg.workers = 3;
  unsetenv("RPG_WORKERS");
  CHECK(resolve_workers(cfg) == 3);
  setenv("RPG_WORKERS", "5", 1);
  CHECK(resolve_workers(cfg) == 5);
  setenv("RPG_WORKERS", "zero", 1);
  CHECK(resolve_workers(cfg) == 3);
  setenv("RPG_WORKERS", "-2", 1);
  CHECK(resolve_workers(cfg) == 3);
  unsetenv("RPG_WORKERS");
}

TEST_CASE("run_experiment: one cell, one repetition, rpg only gives one row") {
  const fs::path dir = scratch("single");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.solvers = {"rpg"};
  const auto report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].solver == "rpg");
  CHECK(!report.rows[0].failed);
  const auto lines = lines_of(slurp(dir / "report.csv"));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == kReportHeader);
  CHECK(lines[1] == format_report_row(report.rows[0], Timing::None));
  const auto summary = lines_of(slurp(dir / "summary.csv"));
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == kSummaryHeader);
  REQUIRE(report.aggregates.size() == 1);
  CHECK(report.aggregates[0].runs == 1);
  CHECK(report.aggregates[0].mean_iterations == report.rows[0].iterations);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: row count is cells x repetitions x solvers") {
  const fs::path dir = scratch("count");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.n_values = {8, 10};
  cfg.lambda_values = {0.3, 0.6};
  cfg.repetitions = 2;
  cfg.solvers = {"varpg", "rpg"};
  const auto report = run_experiment(cfg);
  CHECK(report.rows.size() == 4 * 2 * 2);
  CHECK(lines_of(slurp(dir / "report.csv")).size() == 1 + 16);
  CHECK(report.aggregates.size() == 4 * 2);
  CHECK(report.failures() == 0);
  // Solver order within a repetition follows the list, and data seeds differ per repetition.
  CHECK(report.rows[0].solver == "varpg");
  CHECK(report.rows[1].solver == "rpg");
  CHECK(report.rows[0].seed == report.rows[1].seed);
  CHECK(report.rows[0].seed != report.rows[2].seed);
  for (const auto& a : report.aggregates) CHECK(a.runs == 2);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: accelerated rows use the RPG value as their target") {
  const fs::path dir = scratch("target");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.solvers = {"varpg", "parpg"};
  const auto report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 2);
  // RPG runs silently; both accelerated rows stop on its value.
  ExperimentConfig with_rpg = cfg;
  with_rpg.solvers = {"rpg"};
  with_rpg.output_dir = (dir / "rpg").string();
  const double target = run_experiment(with_rpg).rows[0].final_value;
  for (const auto& r : report.rows) {
    CAPTURE(r.solver);
    CHECK(r.termination == "TargetValue");
    CHECK(r.final_value <= target);
  }
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: identical seeds give byte-identical reports, any worker count") {
  const fs::path dir = scratch("determinism");
  ExperimentConfig cfg = tiny_config(dir / "a");
  cfg.n_values = {8, 10};
  cfg.repetitions = 3;
  run_experiment(cfg);
  cfg.output_dir = (dir / "b").string();
  run_experiment(cfg);
  cfg.output_dir = (dir / "c").string();
  cfg.workers = 4;
  run_experiment(cfg);
  const std::string a = slurp(dir / "a" / "report.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b" / "report.csv"));
  CHECK(a == slurp(dir / "c" / "report.csv"));
  CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "c" / "summary.csv"));
  cfg.seed = 2;
  cfg.output_dir = (dir / "d").string();
  run_experiment(cfg);
  CHECK(a != slurp(dir / "d" / "report.csv"));
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: sparsity lies in [0, 1] and wall-clock seconds are positive") {
  const fs::path dir = scratch("columns");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.timing = Timing::Wall;
  cfg.variant = rpg::spca::Variant::StiefelScotlass;
  cfg.repetitions = 2;
  const auto report = run_experiment(cfg);
  for (const auto& r : report.rows) {
    CHECK(r.sparsity >= 0.0);
    CHECK(r.sparsity <= 1.0);
    CHECK(r.seconds > 0.0);
  }
  const auto lines = lines_of(slurp(dir / "report.csv"));
  for (const auto& line : lines) CHECK(count_fields(line) == count_fields(kReportHeader));
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: a failing solver is recorded in its row and the grid continues") {
  const fs::path dir = scratch("failure");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.repetitions = 2;
  // An estimate above the upper constant is rejected when the bound is checked.
  cfg.overrides["parpg"].check_estimate_bound = true;
  cfg.overrides["parpg"].lipschitz_upper = 1.0;
  cfg.overrides["parpg"].lipschitz_estimate = 2.0;
  const auto report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 6);
  CHECK(report.failures() == 2);
  for (const auto& r : report.rows) {
    CAPTURE(r.solver);
    CHECK(r.failed == (r.solver == "parpg"));
    if (r.failed) CHECK(r.termination == "Failed:ConfigError");
  }
  const auto lines = lines_of(slurp(dir / "report.csv"));
  CHECK(lines.size() == 7);
  CHECK(lines[3].find("Failed:ConfigError") != std::string::npos);
  CHECK(report.aggregates[2].failures == 2);
  CHECK(report.aggregates[2].runs == 0);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: an unwritable output directory is an IoError") {
  const fs::path dir = scratch("blocked");
  fs::create_directories(dir);
  { std::ofstream(dir / "file") << "x"; }
  ExperimentConfig cfg = tiny_config(dir / "file" / "sub");
  try {
    run_experiment(cfg);
    FAIL("no exception");
  } catch (const rpg::Error& e) {
    CHECK(e.kind() == rpg::ErrorKind::IoError);
  }
  fs::remove_all(dir);
}

TEST_CASE("traces: files per run, round trip and constant column count") {
  const fs::path dir = scratch("traces");
  ExperimentConfig cfg = tiny_config(dir);
  cfg.write_traces = true;
  cfg.timing = Timing::Wall;
  const auto cell = expand_grid(cfg)[0];
  std::vector<rpg::RunResult> results;
  const auto rows = run_instance(cfg, cell, 5, 0, &results);
  REQUIRE(results.size() == 3);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto path = dir / (rows[i].solver + ".csv");
    fs::create_directories(dir);
    emit_trace(results[i], path.string());
    const auto parsed = parse_trace(path.string());
    REQUIRE(parsed.size() == results[i].trace.size());
    CHECK(parsed.front().k == 0);
    for (std::size_t k = 0; k < parsed.size(); ++k) {
      const auto& a = parsed[k];
      const auto& b = results[i].trace[k];
      CHECK(a.k == b.k);
      CHECK(a.f_value == b.f_value);
      CHECK(a.eta_norm == b.eta_norm);
      CHECK(a.restarted == b.restarted);
      CHECK(a.linesearch_steps == b.linesearch_steps);
      CHECK(a.elapsed_seconds == b.elapsed_seconds);
    }
    const auto lines = lines_of(slurp(path));
    CHECK(lines[0] == kTraceHeader);
    for (const auto& line : lines) CHECK(count_fields(line) == 6);
  }

  run_experiment(cfg);
  for (const char* s : {"rpg", "varpg", "parpg"}) {
    const auto path = dir / "traces" / (std::string("oblique_n10_p2_m10_lambda0.5_rep0_") + s + ".csv");
    CAPTURE(path.string());
    CHECK(fs::exists(path));
  }
  fs::remove_all(dir);
}

TEST_CASE("traces: empty trace guard and NA seconds") {
  const fs::path dir = scratch("empty_trace");
  fs::create_directories(dir);
  rpg::RunResult r;
  r.final_value = 3.25;
  emit_trace(r, (dir / "t.csv").string(), Timing::None);
  const auto lines = lines_of(slurp(dir / "t.csv"));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "0,3.25,0,0,0,NA");
  const auto parsed = parse_trace((dir / "t.csv").string());
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].k == 0);
  CHECK(parsed[0].f_value == 3.25);
  CHECK(parsed[0].elapsed_seconds == 0.0);

  { std::ofstream(dir / "bad.csv") << "k,F\n0,1\n"; }
  CHECK_THROWS_AS(parse_trace((dir / "bad.csv").string()), rpg::Error);
  { std::ofstream(dir / "short.csv") << kTraceHeader << "\n0,1,2\n"; }
  CHECK_THROWS_AS(parse_trace((dir / "short.csv").string()), rpg::Error);
  CHECK_THROWS_AS(parse_trace((dir / "none.csv").string()), rpg::Error);
  fs::remove_all(dir);
}

TEST_CASE("cli: demo smoke test") {
  std::string out;
  CHECK(cli({"demo", "--variant", "oblique", "--n", "32", "--p", "4", "--lambda", "2", "--seed", "1"}, &out) == 0);
  CHECK(out.find("rpg") != std::string::npos);
  CHECK(out.find("parpg") != std::string::npos);
  CHECK(out.find("TargetValue") != std::string::npos);
}

TEST_CASE("cli: exit codes") {
  std::string out;
  std::string err;
  CHECK(cli({"run", "missing.cfg"}, &out, &err) == 2);
  CHECK(err.find("missing.cfg") != std::string::npos);
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(out.find("demo") != std::string::npos);
  CHECK(cli({"demo", "--help"}, &out) == 0);
  CHECK(cli({"--frobnicate"}, &out, &err) == 2);
  CHECK(err.find("Usage") != std::string::npos);
  CHECK(cli({"demo", "--variant", "torus"}) == 2);
  CHECK(cli({}) == 2);
  CHECK(cli({"validate", "--cases", "3"}, &out) == 0);
  CHECK(out.find("FAIL") == std::string::npos);
}

TEST_CASE("cli: run writes a report and maps row failures to exit 3") {
  const fs::path dir = scratch("cli_run");
  fs::create_directories(dir);
  const fs::path good = dir / "good.yaml";
  {
    std::ofstream(good) << "grid: {n: 8, p: 2, m: 10, lambda: 0.5}\nsolvers: [rpg]\ntiming: none\noutput_dir: "
                        << (dir / "out_good").string() << "\n";
  }
  CHECK(cli({"run", good.c_str()}) == 0);
  CHECK(lines_of(slurp(dir / "out_good" / "report.csv")).size() == 2);

  const std::string override_dir = (dir / "override").string();
  CHECK(cli({"run", good.c_str(), "--output", override_dir.c_str(), "--workers", "2"}) == 0);
  CHECK(fs::exists(dir / "override" / "report.csv"));

  const fs::path bad_key = dir / "bad.yaml";
  { std::ofstream(bad_key) << "grid: {n: 8}\nspeed: fast\n"; }
  CHECK(cli({"run", bad_key.c_str()}) == 2);

  const fs::path failing = dir / "failing.yaml";
  {
    std::ofstream(failing) << "grid: {n: 8, p: 2, m: 10, lambda: 0.5}\nsolvers: [rpg]\noutput_dir: "
                           << (dir / "out_fail").string()
                           << "\nsolver_config: {rpg: {check_estimate_bound: true, lipschitz_upper: 1, "
                              "lipschitz_estimate: 2}}\n";
  }
  CHECK(cli({"run", failing.c_str()}) == 3);
  CHECK(lines_of(slurp(dir / "out_fail" / "report.csv")).size() == 2);
  fs::remove_all(dir);
}
