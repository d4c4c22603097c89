#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rpg/solvers.hpp"
#include "rpg/spca.hpp"

namespace rpg::harness {

enum class DataKind { Random, Synthetic };

/// `None` writes "NA" in every seconds column so reports of repeated runs
/// compare byte for byte.
enum class Timing { Wall, None };

std::string to_string(DataKind kind);
std::string to_string(Timing timing);

/// Per-solver replacements for the variant defaults. Unset fields keep the
/// defaults computed from the data.
struct SolverOverrides {
  std::optional<double> lipschitz_upper;
  std::optional<double> lipschitz_estimate;
  std::optional<double> tau;
  std::optional<double> sigma;
  std::optional<double> nu;
  std::optional<int> interval;
  std::optional<int> interval_min;
  std::optional<int> interval_max;
  std::optional<int> linesearch_max;
  std::optional<int> max_iterations;
  std::optional<double> stationarity_tol;
  std::optional<bool> check_estimate_bound;

  void apply(SolverConfig& cfg) const;
};

inline constexpr int kDefaultMaxIterations = 1000000;

struct ExperimentConfig {
  spca::Variant variant = spca::Variant::ObliqueWeaklyCorrelated;
  std::vector<Eigen::Index> n_values{32};
  std::vector<Eigen::Index> p_values{4};
  std::vector<Eigen::Index> m_values{20};
  std::vector<double> lambda_values{2.0};
  DataKind data = DataKind::Random;
  double noise_variance = 0.25;
  int repetitions = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> solvers{"rpg", "varpg", "parpg"};
  /// Keys "all", "rpg", "varpg", "parpg"; solver-specific entries win.
  std::map<std::string, SolverOverrides> overrides;
  std::string output_dir = "results";
  bool write_traces = false;
  Timing timing = Timing::Wall;
  int workers = 1;

  /// Throws ConfigError.
  void validate() const;
  std::size_t cell_count() const;
};

/// Parses the YAML schema documented in docs/config.md. Unknown keys and
/// malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& yaml_text);
/// Missing or unreadable files raise ConfigError as well.
ExperimentConfig load_config(const std::string& path);

struct Cell {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Eigen::Index m = 0;
  double lambda = 0.0;
};

/// Cells in row-major order over (n, p, m, lambda).
std::vector<Cell> expand_grid(const ExperimentConfig& cfg);

struct ReportRow {
  std::string variant;
  Cell cell;
  std::uint64_t seed = 0;  // data seed derived from (seed, cell, repetition)
  int repetition = 0;
  std::string solver;
  int iterations = 0;
  double final_value = 0.0;
  double sparsity = 0.0;
  double seconds = 0.0;
  std::string termination;  // Termination name or "Failed:<ErrorKind>"
  std::string message;
  bool failed = false;
};

struct Aggregate {
  Cell cell;
  std::string solver;
  int runs = 0;
  int failures = 0;
  double mean_iterations = 0.0;
  double mean_seconds = 0.0;
  double mean_sparsity = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<Aggregate> aggregates;
  std::size_t failures() const;
};

inline constexpr const char* kReportHeader =
    "variant,n,p,m,lambda,seed,solver,iterations,final_value,sparsity,seconds,termination";
inline constexpr const char* kTraceHeader = "k,F,eta_norm,restarted,linesearch_steps,seconds";
inline constexpr const char* kSummaryHeader =
    "variant,n,p,m,lambda,solver,runs,failures,mean_iterations,mean_seconds,mean_sparsity";

std::string format_report_row(const ReportRow& row, Timing timing);

/// Worker count: RPG_WORKERS when set to a positive integer, else cfg.workers.
int resolve_workers(const ExperimentConfig& cfg);

/// Runs every (cell, repetition, solver). Per cell and repetition RPG runs
/// first and its final value becomes the target of V-ARPG and P-ARPG (RPG
/// runs silently when it is not in the solver list). Rows are appended to
/// output_dir/report.csv in grid order as soon as they are complete; the
/// summary goes to output_dir/summary.csv at the end. Solver failures are
/// recorded in their row and never stop the grid. Throws IoError when the
/// output cannot be written.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// One problem instance solved by the requested solvers, without files.
std::vector<ReportRow> run_instance(const ExperimentConfig& cfg, const Cell& cell,
                                    std::uint64_t data_seed, int repetition,
                                    std::vector<RunResult>* results = nullptr);

/// Writes one row per IterationRecord (the k = 0 row always exists).
void emit_trace(const RunResult& result, const std::string& path, Timing timing = Timing::Wall);
/// Reads a file written by emit_trace. A "NA" seconds entry reads as 0.
std::vector<IterationRecord> parse_trace(const std::string& path);

/// Seeded property checks of the geometry, prox and gradient code, one line
/// per suite. Returns true when every suite passes.
bool validate_properties(std::uint64_t seed, int cases, std::ostream& out);

/// Entry point of the command-line tool. Exit codes: 0 success, 2 config or
/// usage error, 3 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpg::harness
