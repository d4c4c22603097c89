#include "rpg/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <string>
#include <tuple>

#include "rpg/errors.hpp"

namespace rpg {

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
 public:
  double seconds() const {
    const double s = std::chrono::duration<double>(Clock::now() - start_).count();
    return s > 0.0 ? s : 1e-9;
  }

 private:
  Clock::time_point start_ = Clock::now();
};

Error at_iteration(const Error& e, int k) {
  return Error(e.kind(), "iteration " + std::to_string(k) + ": " + e.what());
}

bool stationary(const Matrix& eta, double weight, const SolverConfig& cfg) {
  return stationarity_measure(eta, weight) <
         cfg.stationarity_tol * static_cast<double>(eta.rows() * eta.cols());
}

// Differences of F below a few units in the last place are rounding noise;
// without this allowance a converged P-ARPG run keeps restarting and
// enlarging its estimate on noise alone.
double rounding_slack(double f) {
  return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
}

bool below_target(double value, const SolverConfig& cfg) {
  return cfg.target_value && value < *cfg.target_value;
}

void finish(RunResult& r, const Matrix& x, double value) {
  r.final_point = x;
  r.final_value = value;
  r.iterations = static_cast<int>(r.trace.size()) - 1;
  r.sparsity = sparsity_level(x);
}

prox::ProxSolution solve_prox(const CompositeProblem& problem, const Matrix& x, double weight) {
  return problem.prox->solve({x, problem.riemannian_gradient(x), weight, problem.lambda});
}

// Shared loop of V-ARPG and P-ARPG; `safeguard` enables the P-ARPG checks.
RunResult accelerated(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
                      const Observer& observer, bool safeguard) {
  cfg.validate();
  const Stopwatch clock;
  const Geometry& geometry = *problem.geometry;
  RunResult result;

  Matrix x = x0;
  Matrix y = x0;
  double t = 1.0;
  double fx = problem.value(x);
  result.trace.push_back({0, fx, 0.0, 0, false, 0, clock.seconds()});

  SafeguardState state;
  if (safeguard) {
    state.z = x0;
    state.z_value = fx;
    state.next_check = cfg.interval;
    state.estimate = cfg.lipschitz_estimate;
    state.interval = cfg.interval;
    result.checkpoint_values.push_back(fx);
  }

  result.termination = Termination::MaxIter;
  if (below_target(fx, cfg)) {
    result.termination = Termination::TargetValue;
  } else {
    for (int k = 0; k < cfg.max_iterations; ++k) {
      IterationRecord rec;
      rec.k = k + 1;
      try {
        if (safeguard && k == state.next_check) {
          const SafeguardOutcome o = safeguard_step(state, x, y, t, fx, problem, cfg);
          rec.restarted = o.restarted;
          rec.linesearch_steps = o.linesearch_steps;
          if (o.restarted) fx = problem.value(x);
          result.checkpoint_values.push_back(state.z_value);
          state.next_check += state.interval;
        }
        const double weight = safeguard ? state.estimate : cfg.lipschitz_upper;
        const prox::ProxSolution sol = solve_prox(problem, y, weight);
        const Matrix x_next = geometry.retract(y, sol.eta);
        const double t_next = momentum_next(t);
        rec.eta_norm = sol.eta.norm();
        rec.inner_iterations = sol.inner_iterations;

        Matrix y_next;
        bool aborted = false;
        try {
          Matrix step = ((t_next + t - 1.0) / t_next) * sol.eta;
          if (t != 1.0) step -= ((t - 1.0) / t_next) * geometry.inverse_retract(y, x);
          y_next = geometry.retract(y, step);
        } catch (const Error& e) {
          aborted = true;
          result.message = std::string(to_string(ErrorKind::InverseRetractionFailure)) +
                           " at iteration " + std::to_string(k) + ": " + e.what();
        }

        x = x_next;
        fx = problem.value(x);
        rec.f_value = fx;
        rec.elapsed_seconds = clock.seconds();
        result.trace.push_back(rec);
        if (aborted) {
          result.termination = Termination::Aborted;
          break;
        }
        y = std::move(y_next);
        t = t_next;
        if (observer) observer({k + 1, x, y, t});

        if (below_target(fx, cfg)) {
          result.termination = Termination::TargetValue;
          break;
        }
        if (!cfg.target_value && stationary(sol.eta, weight, cfg)) {
          result.termination = Termination::StationarityTol;
          break;
        }
      } catch (const Error& e) {
        throw at_iteration(e, k);
      }
    }
  }
  result.restarts = state.restart_count;
  result.final_estimate = safeguard ? state.estimate : cfg.lipschitz_upper;
  result.final_interval = state.interval;
  finish(result, x, fx);
  return result;
}

}  // namespace

double CompositeProblem::value(const Matrix& x) const {
  return smooth->value(x) + lambda * prox::l1_norm(x);
}

Matrix CompositeProblem::riemannian_gradient(const Matrix& x) const {
  return geometry->project(x, smooth->euclidean_gradient(x));
}

void SolverConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigError, what); };
  if (!(lipschitz_upper > 0.0) || !(lipschitz_estimate > 0.0)) fail("Lipschitz constants must be positive");
  if (check_estimate_bound && lipschitz_estimate > lipschitz_upper) {
    fail("lipschitz_estimate must not exceed lipschitz_upper");
  }
  if (!(tau > 1.0)) fail("tau must exceed 1");
  if (!(sigma > 0.0 && sigma < 1.0)) fail("sigma must lie in (0, 1)");
  if (!(nu > 0.0 && nu < 1.0)) fail("nu must lie in (0, 1)");
  if (interval_min < 1 || interval_min > interval || interval > interval_max) {
    fail("safeguard intervals must satisfy 1 <= N_min <= N <= N_max");
  }
  if (linesearch_max < 1) fail("N_ls must be at least 1");
  if (max_iterations < 0) fail("max_iterations must be nonnegative");
  if (!(stationarity_tol >= 0.0)) fail("stationarity_tol must be nonnegative");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::StationarityTol: return "StationarityTol";
    case Termination::TargetValue: return "TargetValue";
    case Termination::MaxIter: return "MaxIter";
    case Termination::Aborted: return "Aborted";
  }
  return "Unknown";
}

double stationarity_measure(const Matrix& eta, double lipschitz) {
  return eta.squaredNorm() * lipschitz * lipschitz;
}

double sparsity_level(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>((x.array().abs() < 1e-5).count()) / static_cast<double>(x.size());
}

double momentum_next(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

SafeguardOutcome safeguard_step(SafeguardState& state, Matrix& x, Matrix& y, double& t,
                                double f_x, const CompositeProblem& problem,
                                const SolverConfig& cfg) {
  const Geometry& geometry = *problem.geometry;
  const double initial_estimate = state.estimate;
  SafeguardOutcome out;

  Matrix eta;
  Matrix candidate;
  double candidate_value = 0.0;
  for (;;) {
    eta = solve_prox(problem, state.z, state.estimate).eta;
    const double eta_sq = eta.squaredNorm();
    double alpha = 1.0;
    int ls = 0;
    candidate = geometry.retract(state.z, eta);
    candidate_value = problem.value(candidate);
    const double slack = rounding_slack(state.z_value);
    while (candidate_value > state.z_value - cfg.sigma * alpha * eta_sq + slack &&
           ls < cfg.linesearch_max) {
      alpha *= cfg.nu;
      ++ls;
      candidate = geometry.retract(state.z, alpha * eta);
      candidate_value = problem.value(candidate);
    }
    out.linesearch_steps += ls;
    if (ls < cfg.linesearch_max) break;

    // Line search failed: the estimate is too small.
    state.estimate *= cfg.tau;
    ++out.enlargements;
    if (out.enlargements > cfg.max_estimate_enlargements || state.estimate > 1e12 * initial_estimate) {
      throw Error(ErrorKind::UnboundedEstimate,
                  "safeguard: estimate grew to " + std::to_string(state.estimate));
    }
  }

  if (candidate_value < f_x - rounding_slack(f_x)) {
    if (state.interval != cfg.interval_max) state.estimate *= cfg.tau;
    x = candidate;
    y = x;
    t = 1.0;
    state.interval = std::max(state.interval - 1, cfg.interval_min);
    ++state.restart_count;
    out.restarted = true;
    state.z_value = candidate_value;
  } else {
    state.interval = std::min(state.interval + 1, cfg.interval_max);
    state.z_value = f_x;
  }
  state.z = x;
  return out;
}

RunResult rpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
              const Observer& observer) {
  cfg.validate();
  const Stopwatch clock;
  RunResult result;
  Matrix x = x0;
  double fx = problem.value(x);
  result.trace.push_back({0, fx, 0.0, 0, false, 0, clock.seconds()});
  result.final_estimate = cfg.lipschitz_upper;
  result.termination = Termination::MaxIter;

  if (below_target(fx, cfg)) {
    result.termination = Termination::TargetValue;
  } else {
    for (int k = 0; k < cfg.max_iterations; ++k) {
      try {
        const prox::ProxSolution sol = solve_prox(problem, x, cfg.lipschitz_upper);
        if (stationary(sol.eta, cfg.lipschitz_upper, cfg)) {
          result.termination = Termination::StationarityTol;
          break;
        }
        x = problem.geometry->retract(x, sol.eta);
        fx = problem.value(x);
        result.trace.push_back(
            {k + 1, fx, sol.eta.norm(), sol.inner_iterations, false, 0, clock.seconds()});
        if (observer) observer({k + 1, x, x, 1.0});
        if (below_target(fx, cfg)) {
          result.termination = Termination::TargetValue;
          break;
        }
      } catch (const Error& e) {
        throw at_iteration(e, k);
      }
    }
  }
  finish(result, x, fx);
  return result;
}

RunResult varpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
                const Observer& observer) {
  return accelerated(problem, x0, cfg, observer, false);
}

RunResult parpg(const CompositeProblem& problem, const Matrix& x0, const SolverConfig& cfg,
                const Observer& observer) {
  return accelerated(problem, x0, cfg, observer, true);
}

RateFit empirical_rate_fit(const std::vector<double>& values, double f_star) {
  std::vector<double> log_k;
  std::vector<double> k_lin;
  std::vector<double> log_gap;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double gap = values[k] - f_star;
    if (gap > 0.0 && std::isfinite(gap)) {
      log_k.push_back(std::log(static_cast<double>(k)));
      k_lin.push_back(static_cast<double>(k));
      log_gap.push_back(std::log(gap));
    }
  }
  if (log_gap.size() < 10) {
    throw Error(ErrorKind::InsufficientData,
                "empirical_rate_fit: " + std::to_string(log_gap.size()) + " usable points, need 10");
  }

  auto fit = [&](const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += log_gap[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (log_gap[i] - my);
      syy += (log_gap[i] - my) * (log_gap[i] - my);
    }
    const double slope = sxy / sxx;
    const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return std::pair{slope, r2};
  };

  RateFit out;
  out.points = static_cast<int>(log_gap.size());
  std::tie(out.exponent, out.r2) = fit(log_k);
  std::tie(out.linear_rate, out.linear_r2) = fit(k_lin);
  out.power_law_preferred = out.r2 >= out.linear_r2;
  return out;
}

RateFit empirical_rate_fit(const std::vector<IterationRecord>& trace, double f_star) {
  std::vector<double> values;
  values.reserve(trace.size());
  for (const auto& r : trace) values.push_back(r.f_value);
  return empirical_rate_fit(values, f_star);
}

}  // namespace rpg
