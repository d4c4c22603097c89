#pragma once

#include <memory>
#include <vector>

#include "rpg/linalg.hpp"
#include "rpg/manifolds.hpp"

namespace rpg::prox {

/// The model l_x(eta) = <grad, eta> + (weight / 2) ||eta||^2 + lambda ||R_x(eta)||_1
/// whose stationary points with l_x(eta) <= l_x(0) are the search directions.
struct ProxModel {
  Matrix x;
  Matrix grad;    // Riemannian gradient of the smooth term, tangent at x
  double weight;  // the quadratic weight (L-tilde or the adaptive estimate)
  double lambda;  // l1 weight, >= 0
};

struct ProxSolution {
  Matrix eta;
  double model_value = 0.0;
  int inner_iterations = 0;
  double kkt_residual = 0.0;
  bool converged = true;
};

double l1_norm(const Matrix& x);

double eval_prox_model(const Geometry& geometry, const ProxModel& model, const Matrix& eta);

/// Global minimizer of (1 / 2 lambda) ||y - x||^2 + ||y||_1 over the unit
/// sphere, for any x and lambda > 0. Ties for the largest |x_i| go to the
/// smallest index.
Vector sphere_l1_closed_form(const Vector& x, double lambda);

/// u(y) = (1 / 2 lambda) ||Log_x(y) + xi||^2 + ||y||_1, the per-column prox
/// objective on the sphere.
double sphere_prox_objective(const Vector& x, const Vector& xi, double lambda, const Vector& y);

struct SphereProxResult {
  Vector y;
  int iterations = 0;
  bool converged = false;  // false: iteration cap hit, y is the best iterate
};

/// Conditional-gradient iteration on the linearisation of h(y) = (1 / 2 lambda)
/// ||Log_x(y) + xi||^2: y_{k+1} = argmin_y (1/2) ||y + grad h(y_k)||^2 + ||y||_1.
/// Stops when both x^T y and xi^T y move by less than tol.
/// Throws NumericalDomain if an iterate becomes antipodal to x.
SphereProxResult sphere_prox_conditional_gradient(const Vector& x, const Vector& xi, double lambda,
                                                  const Vector& y0, double tol = 1e-10,
                                                  int max_iter = 100);

struct ObliqueProxOptions {
  double tol = 1e-10;
  int max_iter = 100;
};

/// Column-separable prox on OB(p, n) with the exponential map. A column whose
/// solver output does not improve on y = x_j falls back to eta_j = 0, so the
/// result always satisfies l_x(eta) <= l_x(0).
ProxSolution oblique_prox(const ProxModel& model, const ObliqueProxOptions& options = {});

struct TangentProxResult {
  Matrix xi;
  /// Lambda with v + L xi + lambda d||Y + xi||_1 + Y Lambda containing zero.
  Matrix multiplier;
  int iterations = 0;
  double residual = 0.0;  // ||Y^T xi + xi^T Y||_F
  bool converged = false;
  std::vector<double> residual_history;
};

/// argmin over T_Y St(p, n) of <v, xi> + (L / 2) ||xi||^2 + lambda ||Y + xi||_1.
/// Semismooth Newton on the multiplier of the tangency constraint, with a
/// dual gradient-ascent step whenever the Newton step fails to reduce the
/// residual. The residual history is nonincreasing.
TangentProxResult tangent_constrained_prox(const Matrix& y, const Matrix& v, double weight,
                                           double lambda, double tol = 1e-10, int max_iter = 200);

struct StiefelProxOptions {
  double sigma = 1e-4;
  double tol = 3e-3;
  int max_iter = 50;
  double inner_tol = 1e-10;
  int inner_max_iter = 200;
  int max_halvings = 40;
};

struct StiefelProxTrace {
  std::vector<double> model_values;  // l_x(eta_k), k = 0, 1, ...
  std::vector<int> halvings;         // per outer iteration
};

/// Outer descent loop on l_x using the differentiated polar retraction.
/// Transport singularities are reported as StepTooLong.
ProxSolution stiefel_prox(const ProxModel& model, const StiefelProxOptions& options = {},
                          StiefelProxTrace* trace = nullptr);

/// Solves the proximal subproblem for one geometry.
class ProxOperator {
 public:
  virtual ~ProxOperator() = default;
  virtual ProxSolution solve(const ProxModel& model) const = 0;
};

class ObliqueProx final : public ProxOperator {
 public:
  explicit ObliqueProx(ObliqueProxOptions options = {}) : options_(options) {}
  ProxSolution solve(const ProxModel& model) const override { return oblique_prox(model, options_); }

 private:
  ObliqueProxOptions options_;
};

class StiefelProx final : public ProxOperator {
 public:
  explicit StiefelProx(StiefelProxOptions options = {}) : options_(options) {}
  ProxSolution solve(const ProxModel& model) const override { return stiefel_prox(model, options_); }

 private:
  StiefelProxOptions options_;
};

}  // namespace rpg::prox
