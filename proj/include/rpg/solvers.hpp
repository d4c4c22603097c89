#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpg/linalg.hpp"
#include "rpg/manifolds.hpp"
#include "rpg/proxmap.hpp"

namespace rpg {

/// Smooth part f of F = f + lambda ||.||_1, evaluated in the ambient space.
class SmoothFunction {
 public:
  virtual ~SmoothFunction() = default;
  virtual double value(const Matrix& x) const = 0;
  virtual Matrix euclidean_gradient(const Matrix& x) const = 0;
};

struct CompositeProblem {
  std::shared_ptr<const Geometry> geometry;
  std::shared_ptr<const SmoothFunction> smooth;
  std::shared_ptr<const prox::ProxOperator> prox;
  double lambda = 0.0;

  double value(const Matrix& x) const;
  Matrix riemannian_gradient(const Matrix& x) const;
};

struct SolverConfig {
  double lipschitz_upper = 1.0;     // L-tilde: prox weight for RPG and V-ARPG
  double lipschitz_estimate = 1.0;  // adaptive estimate used by P-ARPG and its safeguard
  double tau = 1.1;
  double sigma = 1e-4;
  double nu = 0.5;
  int interval = 5;  // N
  int interval_min = 2;
  int interval_max = 10;
  int linesearch_max = 3;  // N_ls
  int max_iterations = 10000;
  double stationarity_tol = 1e-8;  // compared against ||eta L||^2 / (n p)
  std::optional<double> target_value;
  int max_estimate_enlargements = 30;
  /// Require lipschitz_estimate <= lipschitz_upper at start (off for the
  /// Stiefel defaults, whose printed constants violate it).
  bool check_estimate_bound = true;

  /// Throws ConfigError.
  void validate() const;
};

enum class Termination { StationarityTol, TargetValue, MaxIter, Aborted };

std::string to_string(Termination t);

struct IterationRecord {
  int k = 0;
  double f_value = 0.0;
  double eta_norm = 0.0;  // norm of the step that produced x_k (0 at k = 0)
  int inner_iterations = 0;
  bool restarted = false;
  int linesearch_steps = 0;
  double elapsed_seconds = 0.0;
};

struct RunResult {
  Matrix final_point;
  double final_value = 0.0;
  int iterations = 0;
  Termination termination = Termination::MaxIter;
  std::vector<IterationRecord> trace;  // size iterations + 1
  double sparsity = 0.0;
  int restarts = 0;
  std::vector<double> checkpoint_values;  // F(z_j) at safeguard checkpoints
  double final_estimate = 0.0;
  int final_interval = 0;  // safeguard interval N at exit (P-ARPG only)
  std::string message;  // reason for Aborted
};

/// Snapshot handed to an optional observer after every iteration.
struct IterateSnapshot {
  int k;
  const Matrix& x;
  const Matrix& y;  // auxiliary (extrapolated) point; equals x for RPG
  double t;
};
using Observer = std::function<void(const IterateSnapshot&)>;

struct SafeguardState {
  Matrix z;  // reference iterate z_{j1}
  double z_value = 0.0;
  int next_check = 0;  // j2
  double estimate = 0.0;
  int interval = 0;
  int restart_count = 0;
};

struct SafeguardOutcome {
  bool restarted = false;
  int linesearch_steps = 0;
  int enlargements = 0;
};

/// One invocation of the safeguard: a proximal step from the reference point
/// with backtracking, then either a restart at the improved point or an
/// unchanged accelerated state. Updates z, estimate, interval and
/// restart_count; the caller advances next_check.
SafeguardOutcome safeguard_step(SafeguardState& state, Matrix& x, Matrix& y, double& t,
                                double f_x, const CompositeProblem& problem,
                                const SolverConfig& cfg);

RunResult rpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
              const Observer& observer = {});
RunResult varpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
                const Observer& observer = {});
RunResult parpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
                const Observer& observer = {});

/// ||eta||^2 L^2, compared by callers against stationarity_tol n p.
double stationarity_measure(const Matrix& eta, double lipschitz);

/// Fraction of entries with magnitude below 1e-5.
double sparsity_level(const Matrix& x);

double momentum_next(double t);

struct RateFit {
  double exponent = 0.0;  // slope of log(F_k - F*) against log k
  double r2 = 0.0;
  double linear_rate = 0.0;  // slope of log(F_k - F*) against k
  double linear_r2 = 0.0;
  bool power_law_preferred = false;
  int points = 0;
};

/// Least-squares fits over the k >= 1 entries with F_k > F*. Throws
/// InsufficientData for fewer than 10 such points.
RateFit empirical_rate_fit(const std::vector<double>& values, double f_star);
RateFit empirical_rate_fit(const std::vector<IterationRecord>& trace, double f_star);

}  // namespace rpg
