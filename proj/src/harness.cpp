#include "rpg/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <system_error>
#include <thread>

#include "rpg/errors.hpp"
#include "rpg/random.hpp"

namespace rpg::harness {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

// Shortest representation that reads back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_seconds(double v, Timing timing) { return timing == Timing::Wall ? fmt(v) : "NA"; }

double parse_double(const std::string& s, const std::string& what) {
  if (s == "NA") return 0.0;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::IoError, "cannot parse " + what + " from '" + s + "'");
  }
  return v;
}

long long parse_integer(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::IoError, "cannot parse " + what + " from '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// ---- YAML helpers ---------------------------------------------------------

template <class T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) config_error("'" + key + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    config_error("'" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

template <class T>
std::vector<T> scalar_or_list(const YAML::Node& node, const std::string& key) {
  std::vector<T> out;
  if (node.IsSequence()) {
    for (const auto& item : node) out.push_back(scalar<T>(item, key));
  } else {
    out.push_back(scalar<T>(node, key));
  }
  return out;
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) config_error("'" + where + "' must be a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

SolverOverrides parse_overrides(const YAML::Node& node, const std::string& where) {
  reject_unknown(node,
                 {"lipschitz_upper", "lipschitz_estimate", "tau", "sigma", "nu", "interval", "interval_min",
                  "interval_max", "linesearch_max", "max_iterations", "stationarity_tol", "check_estimate_bound"},
                 where);
  SolverOverrides o;
  auto get_d = [&](const char* key, std::optional<double>& dst) {
    if (node[key]) dst = scalar<double>(node[key], key);
  };
  auto get_i = [&](const char* key, std::optional<int>& dst) {
    if (node[key]) dst = scalar<int>(node[key], key);
  };
  get_d("lipschitz_upper", o.lipschitz_upper);
  get_d("lipschitz_estimate", o.lipschitz_estimate);
  get_d("tau", o.tau);
  get_d("sigma", o.sigma);
  get_d("nu", o.nu);
  get_i("interval", o.interval);
  get_i("interval_min", o.interval_min);
  get_i("interval_max", o.interval_max);
  get_i("linesearch_max", o.linesearch_max);
  get_i("max_iterations", o.max_iterations);
  get_d("stationarity_tol", o.stationarity_tol);
  if (node["check_estimate_bound"]) o.check_estimate_bound = scalar<bool>(node["check_estimate_bound"], "check_estimate_bound");
  return o;
}

// ---- running ---------------------------------------------------------------

bool known_solver(const std::string& s) { return s == "rpg" || s == "varpg" || s == "parpg"; }

SolverConfig solver_config(const ExperimentConfig& cfg, const spca::SpcaProblem& prob, const std::string& solver) {
  SolverConfig sc = spca::default_solver_config(prob);
  sc.max_iterations = kDefaultMaxIterations;
  if (auto it = cfg.overrides.find("all"); it != cfg.overrides.end()) it->second.apply(sc);
  if (auto it = cfg.overrides.find(solver); it != cfg.overrides.end()) it->second.apply(sc);
  return sc;
}

ReportRow base_row(const ExperimentConfig& cfg, const Cell& cell, std::uint64_t seed, int rep,
                   const std::string& solver) {
  ReportRow row;
  row.variant = spca::to_string(cfg.variant);
  row.cell = cell;
  row.seed = seed;
  row.repetition = rep;
  row.solver = solver;
  return row;
}

void fill_row(ReportRow& row, const RunResult& r) {
  row.iterations = r.iterations;
  row.final_value = r.final_value;
  row.sparsity = r.sparsity;
  row.seconds = r.trace.empty() ? 1e-9 : r.trace.back().elapsed_seconds;
  row.termination = to_string(r.termination);
  row.message = r.message;
}

void fail_row(ReportRow& row, const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  row.failed = true;
  row.termination = "Failed:" + std::string(err ? to_string(err->kind()) : "Exception");
  row.message = e.what();
  row.final_value = std::numeric_limits<double>::quiet_NaN();
}

std::string trace_name(const ReportRow& row) {
  std::ostringstream os;
  os << row.variant << "_n" << row.cell.n << "_p" << row.cell.p << "_m" << row.cell.m << "_lambda"
     << fmt(row.cell.lambda) << "_rep" << row.repetition << "_" << row.solver << ".csv";
  return os.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::string format_summary_row(const std::string& variant, const Aggregate& a, Timing timing) {
  std::ostringstream os;
  os << variant << ',' << a.cell.n << ',' << a.cell.p << ',' << a.cell.m << ',' << fmt(a.cell.lambda) << ','
     << a.solver << ',' << a.runs << ',' << a.failures << ',' << fmt(a.mean_iterations) << ','
     << fmt_seconds(a.mean_seconds, timing) << ',' << fmt(a.mean_sparsity);
  return os.str();
}

}  // namespace

std::string to_string(DataKind kind) { return kind == DataKind::Random ? "random" : "synthetic"; }
std::string to_string(Timing timing) { return timing == Timing::Wall ? "wall" : "none"; }

void SolverOverrides::apply(SolverConfig& cfg) const {
  if (lipschitz_upper) cfg.lipschitz_upper = *lipschitz_upper;
  if (lipschitz_estimate) cfg.lipschitz_estimate = *lipschitz_estimate;
  if (tau) cfg.tau = *tau;
  if (sigma) cfg.sigma = *sigma;
  if (nu) cfg.nu = *nu;
  if (interval) cfg.interval = *interval;
  if (interval_min) cfg.interval_min = *interval_min;
  if (interval_max) cfg.interval_max = *interval_max;
  if (linesearch_max) cfg.linesearch_max = *linesearch_max;
  if (max_iterations) cfg.max_iterations = *max_iterations;
  if (stationarity_tol) cfg.stationarity_tol = *stationarity_tol;
  if (check_estimate_bound) cfg.check_estimate_bound = *check_estimate_bound;
}

void ExperimentConfig::validate() const {
  if (n_values.empty() || p_values.empty() || m_values.empty() || lambda_values.empty()) {
    config_error("every grid axis needs at least one value");
  }
  if (repetitions < 1) config_error("repetitions must be at least 1");
  if (workers < 1) config_error("workers must be at least 1");
  if (solvers.empty()) config_error("the solver list is empty");
  std::set<std::string> seen;
  for (const auto& s : solvers) {
    if (!known_solver(s)) config_error("unknown solver '" + s + "' (expected rpg, varpg or parpg)");
    if (!seen.insert(s).second) config_error("solver '" + s + "' listed twice");
  }
  for (const auto& [key, o] : overrides) {
    if (key != "all" && !known_solver(key)) config_error("solver_config has unknown section '" + key + "'");
    (void)o;
  }
  for (auto lambda : lambda_values) {
    if (!(lambda >= 0.0)) config_error("lambda must be nonnegative");
  }
  if (!(noise_variance >= 0.0)) config_error("noise_variance must be nonnegative");
  for (auto m : m_values) {
    if (m < 2) config_error("m must be at least 2");
    if (data == DataKind::Synthetic && m % 5 != 0) config_error("synthetic data needs m divisible by 5");
  }
  for (auto n : n_values) {
    if (n < 1) config_error("n must be positive");
    if (data == DataKind::Synthetic && n < 5) config_error("synthetic data needs n >= 5");
    for (auto m : m_values) {
      for (auto p : p_values) {
        if (p < 1 || p > std::min(m, n)) {
          config_error("p = " + std::to_string(p) + " must lie in [1, min(m, n)] for m = " + std::to_string(m) +
                       ", n = " + std::to_string(n));
        }
      }
    }
  }
  if (output_dir.empty()) config_error("output_dir must not be empty");
}

std::size_t ExperimentConfig::cell_count() const {
  return n_values.size() * p_values.size() * m_values.size() * lambda_values.size();
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    config_error(std::string("malformed YAML: ") + e.what());
  }
  if (!root || root.IsNull()) config_error("empty configuration");
  reject_unknown(root,
                 {"variant", "data", "noise_variance", "grid", "repetitions", "seed", "solvers", "solver_config",
                  "output_dir", "traces", "timing", "workers"},
                 "configuration");
  ExperimentConfig cfg;
  if (root["variant"]) cfg.variant = spca::parse_variant(scalar<std::string>(root["variant"], "variant"));
  if (root["data"]) {
    const auto d = scalar<std::string>(root["data"], "data");
    if (d == "random") {
      cfg.data = DataKind::Random;
    } else if (d == "synthetic") {
      cfg.data = DataKind::Synthetic;
    } else {
      config_error("data must be 'random' or 'synthetic', got '" + d + "'");
    }
  }
  if (root["noise_variance"]) cfg.noise_variance = scalar<double>(root["noise_variance"], "noise_variance");
  if (root["grid"]) {
    const YAML::Node grid = root["grid"];
    reject_unknown(grid, {"n", "p", "m", "lambda"}, "grid");
    if (grid["n"]) cfg.n_values = scalar_or_list<Eigen::Index>(grid["n"], "grid.n");
    if (grid["p"]) cfg.p_values = scalar_or_list<Eigen::Index>(grid["p"], "grid.p");
    if (grid["m"]) cfg.m_values = scalar_or_list<Eigen::Index>(grid["m"], "grid.m");
    if (grid["lambda"]) cfg.lambda_values = scalar_or_list<double>(grid["lambda"], "grid.lambda");
  }
  if (root["repetitions"]) cfg.repetitions = scalar<int>(root["repetitions"], "repetitions");
  if (root["seed"]) cfg.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["solvers"]) cfg.solvers = scalar_or_list<std::string>(root["solvers"], "solvers");
  if (root["solver_config"]) {
    const YAML::Node sc = root["solver_config"];
    if (!sc.IsMap()) config_error("'solver_config' must be a mapping");
    for (const auto& kv : sc) {
      const auto key = kv.first.as<std::string>();
      cfg.overrides[key] = parse_overrides(kv.second, "solver_config." + key);
    }
  }
  if (root["output_dir"]) cfg.output_dir = scalar<std::string>(root["output_dir"], "output_dir");
  if (root["traces"]) cfg.write_traces = scalar<bool>(root["traces"], "traces");
  if (root["timing"]) {
    const auto t = scalar<std::string>(root["timing"], "timing");
    if (t == "wall") {
      cfg.timing = Timing::Wall;
    } else if (t == "none") {
      cfg.timing = Timing::None;
    } else {
      config_error("timing must be 'wall' or 'none', got '" + t + "'");
    }
  }
  if (root["workers"]) cfg.workers = scalar<int>(root["workers"], "workers");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Cell> expand_grid(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (auto n : cfg.n_values) {
    for (auto p : cfg.p_values) {
      for (auto m : cfg.m_values) {
        for (auto lambda : cfg.lambda_values) cells.push_back({n, p, m, lambda});
      }
    }
  }
  return cells;
}

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return r.failed; }));
}

std::string format_report_row(const ReportRow& row, Timing timing) {
  std::ostringstream os;
  os << row.variant << ',' << row.cell.n << ',' << row.cell.p << ',' << row.cell.m << ',' << fmt(row.cell.lambda)
     << ',' << row.seed << ',' << row.solver << ',' << row.iterations << ',' << fmt(row.final_value) << ','
     << fmt(row.sparsity) << ',' << fmt_seconds(row.seconds, timing) << ',' << row.termination;
  return os.str();
}

int resolve_workers(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("RPG_WORKERS")) {
    const std::string s(env);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) return v;
  }
  return cfg.workers;
}

std::vector<ReportRow> run_instance(const ExperimentConfig& cfg, const Cell& cell, std::uint64_t data_seed,
                                    int repetition, std::vector<RunResult>* results) {
  std::vector<ReportRow> rows;
  for (const auto& s : cfg.solvers) rows.push_back(base_row(cfg, cell, data_seed, repetition, s));
  if (results) results->assign(cfg.solvers.size(), RunResult{});

  std::optional<spca::SpcaProblem> prob;
  try {
    Matrix a = cfg.data == DataKind::Random
                   ? spca::generate_random_data(cell.m, cell.n, data_seed)
                   : spca::generate_synthetic_data(cell.m, cell.n, data_seed, cfg.noise_variance);
    prob = spca::make_problem(std::move(a), cell.p, cell.lambda, cfg.variant);
  } catch (const std::exception& e) {
    for (auto& r : rows) fail_row(r, e);
    return rows;
  }
  const CompositeProblem composite = spca::to_composite(*prob);
  const Matrix x0 = spca::initial_point(*prob);

  // RPG first: its value is the target of the accelerated methods.
  std::optional<RunResult> rpg_result;
  std::optional<std::string> rpg_failure;
  std::exception_ptr rpg_error;
  try {
    rpg_result = rpg::rpg(composite, x0, solver_config(cfg, *prob, "rpg"));
  } catch (const std::exception&) {
    rpg_error = std::current_exception();
  }

  for (std::size_t i = 0; i < cfg.solvers.size(); ++i) {
    const std::string& s = cfg.solvers[i];
    ReportRow& row = rows[i];
    try {
      RunResult r;
      if (s == "rpg") {
        if (rpg_error) std::rethrow_exception(rpg_error);
        r = *rpg_result;
      } else {
        SolverConfig sc = solver_config(cfg, *prob, s);
        if (rpg_result) sc.target_value = rpg_result->final_value;
        r = s == "varpg" ? varpg(composite, x0, sc) : parpg(composite, x0, sc);
      }
      fill_row(row, r);
      if (results) (*results)[i] = std::move(r);
    } catch (const std::exception& e) {
      fail_row(row, e);
    }
  }
  return rows;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  if (cfg.write_traces) {
    fs::create_directories(dir / "traces", ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + (dir / "traces").string() + ": " + ec.message());
  }

  std::ofstream report = open_output(dir / "report.csv");
  report << kReportHeader << '\n' << std::flush;

  const std::vector<Cell> cells = expand_grid(cfg);
  const std::size_t reps = static_cast<std::size_t>(cfg.repetitions);
  const std::size_t tasks = cells.size() * reps;

  std::vector<std::optional<std::vector<ReportRow>>> done(tasks);
  std::size_t next_to_write = 0;
  std::mutex mu;
  std::atomic<std::size_t> next_task{0};
  std::exception_ptr io_failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next_task.fetch_add(1);
      if (t >= tasks) return;
      const std::size_t c = t / reps;
      const int rep = static_cast<int>(t % reps);
      const std::uint64_t seed = derive_seed(cfg.seed, c, static_cast<std::uint64_t>(rep));
      std::vector<RunResult> results;
      std::vector<ReportRow> rows = run_instance(cfg, cells[c], seed, rep, &results);
      try {
        if (cfg.write_traces) {
          for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i].failed) emit_trace(results[i], (dir / "traces" / trace_name(rows[i])).string(), cfg.timing);
          }
        }
      } catch (const std::exception&) {
        std::lock_guard<std::mutex> lock(mu);
        if (!io_failure) io_failure = std::current_exception();
      }

      std::lock_guard<std::mutex> lock(mu);
      done[t] = std::move(rows);
      // Rows leave in grid order so the file does not depend on scheduling.
      while (next_to_write < tasks && done[next_to_write]) {
        for (const auto& r : *done[next_to_write]) report << format_report_row(r, cfg.timing) << '\n';
        report.flush();
        ++next_to_write;
      }
      if (!report && !io_failure) {
        io_failure = std::make_exception_ptr(Error(ErrorKind::IoError, "write to report.csv failed"));
      }
    }
  };

  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(resolve_workers(cfg)), tasks));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (io_failure) std::rethrow_exception(io_failure);

  ExperimentReport out;
  for (auto& rows : done) {
    for (auto& r : *rows) out.rows.push_back(std::move(r));
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& s : cfg.solvers) {
      Aggregate a;
      a.cell = cells[c];
      a.solver = s;
      for (const auto& r : out.rows) {
        if (r.solver != s || r.cell.n != a.cell.n || r.cell.p != a.cell.p || r.cell.m != a.cell.m ||
            r.cell.lambda != a.cell.lambda) {
          continue;
        }
        if (r.failed) {
          ++a.failures;
          continue;
        }
        ++a.runs;
        a.mean_iterations += r.iterations;
        a.mean_seconds += r.seconds;
        a.mean_sparsity += r.sparsity;
      }
      if (a.runs > 0) {
        a.mean_iterations /= a.runs;
        a.mean_seconds /= a.runs;
        a.mean_sparsity /= a.runs;
      }
      out.aggregates.push_back(a);
    }
  }

  std::ofstream summary = open_output(dir / "summary.csv");
  summary << kSummaryHeader << '\n';
  for (const auto& a : out.aggregates) {
    summary << format_summary_row(spca::to_string(cfg.variant), a, cfg.timing) << '\n';
  }
  summary.flush();
  if (!summary) throw Error(ErrorKind::IoError, "write to summary.csv failed");
  return out;
}

void emit_trace(const RunResult& result, const std::string& path, Timing timing) {
  std::ofstream out = open_output(path);
  out << kTraceHeader << '\n';
  auto write = [&](const IterationRecord& r) {
    out << r.k << ',' << fmt(r.f_value) << ',' << fmt(r.eta_norm) << ',' << (r.restarted ? 1 : 0) << ','
        << r.linesearch_steps << ',' << fmt_seconds(r.elapsed_seconds, timing) << '\n';
  };
  if (result.trace.empty()) {
    IterationRecord r;
    r.f_value = result.final_value;
    r.elapsed_seconds = 1e-9;
    write(r);
  }
  for (const auto& r : result.trace) write(r);
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

std::vector<IterationRecord> parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error(ErrorKind::IoError, path + ": missing or unexpected header");
  }
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) throw Error(ErrorKind::IoError, path + ": expected 6 columns, got " + std::to_string(f.size()));
    IterationRecord r;
    r.k = static_cast<int>(parse_integer(f[0], "k"));
    r.f_value = parse_double(f[1], "F");
    r.eta_norm = parse_double(f[2], "eta_norm");
    r.restarted = parse_integer(f[3], "restarted") != 0;
    r.linesearch_steps = static_cast<int>(parse_integer(f[4], "linesearch_steps"));
    r.elapsed_seconds = parse_double(f[5], "seconds");
    out.push_back(r);
  }
  return out;
}

}  // namespace rpg::harness
