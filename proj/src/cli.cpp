#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>

#include "rpg/errors.hpp"
#include "rpg/harness.hpp"

namespace rpg::harness {

namespace {

struct DemoOptions {
  std::string variant = "oblique";
  Eigen::Index n = 32;
  Eigen::Index p = 4;
  Eigen::Index m = 20;
  double lambda = 2.0;
  std::uint64_t seed = 1;
  std::string data = "random";
  std::vector<std::string> solvers{"rpg", "varpg", "parpg"};
  std::string trace_dir;
  int max_iterations = kDefaultMaxIterations;
};

int run_demo(const DemoOptions& o, std::ostream& out) {
  ExperimentConfig cfg;
  cfg.variant = spca::parse_variant(o.variant);
  cfg.data = o.data == "synthetic" ? DataKind::Synthetic : DataKind::Random;
  cfg.n_values = {o.n};
  cfg.p_values = {o.p};
  cfg.m_values = {o.m};
  cfg.lambda_values = {o.lambda};
  cfg.solvers = o.solvers;
  cfg.overrides["all"].max_iterations = o.max_iterations;
  cfg.validate();

  std::vector<RunResult> results;
  const Cell cell{o.n, o.p, o.m, o.lambda};
  const auto rows = run_instance(cfg, cell, o.seed, 0, &results);

  out << spca::to_string(cfg.variant) << "  n=" << o.n << " p=" << o.p << " m=" << o.m << " lambda=" << o.lambda
      << " seed=" << o.seed << " data=" << to_string(cfg.data) << "\n";
  out << std::left << std::setw(8) << "solver" << std::right << std::setw(11) << "iterations" << std::setw(22)
      << "F" << std::setw(10) << "sparsity" << std::setw(11) << "seconds" << std::setw(10) << "restarts"
      << "  termination\n";
  bool failed = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    failed = failed || r.failed;
    out << std::left << std::setw(8) << r.solver << std::right << std::setw(11) << r.iterations << std::setw(22)
        << std::setprecision(15) << r.final_value << std::setw(10) << std::setprecision(4) << r.sparsity
        << std::setw(11) << std::setprecision(4) << r.seconds << std::setw(10) << results[i].restarts << "  "
        << r.termination;
    if (r.failed) out << "  (" << r.message << ")";
    out << "\n";
    if (!o.trace_dir.empty() && !r.failed) {
      std::filesystem::create_directories(o.trace_dir);
      const auto path = std::filesystem::path(o.trace_dir) / (r.solver + ".csv");
      emit_trace(results[i], path.string());
    }
  }
  return failed ? 3 : 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Riemannian proximal gradient solvers (RPG, V-ARPG, P-ARPG) for sparse PCA"};
  app.name("rpg_cli");
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> workers;
  std::string output_dir;
  auto* run = app.add_subcommand("run", "Run the experiment grid described by a YAML file");
  run->add_option("config", config_path, "YAML configuration file")->required();
  run->add_option("--workers", workers, "Worker threads (RPG_WORKERS takes precedence)")->check(CLI::PositiveNumber);
  run->add_option("--output", output_dir, "Override output_dir from the configuration");

  DemoOptions demo_opts;
  auto* demo = app.add_subcommand("demo", "Solve one generated instance and print a comparison table");
  demo->add_option("--variant", demo_opts.variant, "oblique or stiefel")
      ->check(CLI::IsMember({"oblique", "stiefel"}))
      ->capture_default_str();
  demo->add_option("--n", demo_opts.n, "Number of variables")->capture_default_str();
  demo->add_option("--p", demo_opts.p, "Number of components")->capture_default_str();
  demo->add_option("--m", demo_opts.m, "Number of samples")->capture_default_str();
  demo->add_option("--lambda", demo_opts.lambda, "l1 weight")->capture_default_str();
  demo->add_option("--seed", demo_opts.seed, "Data seed")->capture_default_str();
  demo->add_option("--data", demo_opts.data, "random or synthetic")
      ->check(CLI::IsMember({"random", "synthetic"}))
      ->capture_default_str();
  demo->add_option("--solvers", demo_opts.solvers, "Subset of rpg varpg parpg")
      ->delimiter(',')
      ->check(CLI::IsMember({"rpg", "varpg", "parpg"}));
  demo->add_option("--trace-dir", demo_opts.trace_dir, "Write one trace CSV per solver here");
  demo->add_option("--max-iterations", demo_opts.max_iterations, "Iteration cap per solver")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::uint64_t validate_seed = 1;
  int validate_cases = 100;
  auto* validate = app.add_subcommand("validate", "Run seeded property checks of the numerical kernels");
  validate->add_option("--seed", validate_seed, "Base seed")->capture_default_str();
  validate->add_option("--cases", validate_cases, "Cases per size and suite")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(config_path);
      if (workers) cfg.workers = *workers;
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      const ExperimentReport report = run_experiment(cfg);
      out << "wrote " << report.rows.size() << " rows to " << (std::filesystem::path(cfg.output_dir) / "report.csv").string()
          << " (" << report.failures() << " failed)\n";
      return report.failures() == 0 ? 0 : 3;
    }
    if (*demo) return run_demo(demo_opts, out);
    if (*validate) return validate_properties(validate_seed, validate_cases, out) ? 0 : 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::ConfigError ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace rpg::harness
