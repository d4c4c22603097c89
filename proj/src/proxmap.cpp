#include "rpg/proxmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "rpg/errors.hpp"

namespace rpg::prox {

namespace {

// theta / sin(theta) and (theta cos(theta) - sin(theta)) / sin(theta)^3 for
// theta in [0, pi); both have removable singularities at theta = 0.
struct AngleFactors {
  double t;  // theta / sin(theta)
  double q;  // (theta cos(theta) - sin(theta)) / sin(theta)^3
};

AngleFactors angle_factors(double sin_theta, double cos_theta) {
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    return {1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0 + 31.0 * t2 * t2 * t2 / 15120.0,
            -1.0 / 3.0 - 2.0 * t2 / 15.0 - 2.0 * t2 * t2 / 63.0 - 4.0 * t2 * t2 * t2 / 675.0};
  }
  const double s3 = sin_theta * sin_theta * sin_theta;
  return {theta / sin_theta, (theta * cos_theta - sin_theta) / s3};
}

// Orthonormal coordinates on symmetric p x p matrices: diagonal entries and
// sqrt(2) times the strict upper triangle.
class SymmetricCoordinates {
 public:
  explicit SymmetricCoordinates(Eigen::Index p) : p_(p) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) pairs_.emplace_back(i, j);
    }
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(pairs_.size()); }

  Vector to_vec(const Matrix& s) const {
    Vector out(dim());
    for (Eigen::Index k = 0; k < dim(); ++k) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
      out(k) = i == j ? s(i, i) : std::sqrt(2.0) * 0.5 * (s(i, j) + s(j, i));
    }
    return out;
  }

  Matrix to_mat(const Vector& v) const {
    Matrix s = Matrix::Zero(p_, p_);
    for (Eigen::Index k = 0; k < dim(); ++k) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
      if (i == j) {
        s(i, i) = v(k);
      } else {
        s(i, j) = s(j, i) = v(k) / std::sqrt(2.0);
      }
    }
    return s;
  }

 private:
  Eigen::Index p_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs_;
};

struct DualState {
  Matrix lambda;  // symmetric multiplier
  Matrix xi;
  Matrix residual;
  Matrix active;  // 1 where the soft-threshold is in its linear regime
  double norm = 0.0;
};

class TangentDual {
 public:
  TangentDual(const Matrix& y, const Matrix& v, double weight, double l1)
      : y_(y), v_(v), weight_(weight), threshold_(l1 / weight) {}

  DualState evaluate(const Matrix& lambda) const {
    DualState s;
    s.lambda = lambda;
    const Matrix arg = y_ - (v_ + 2.0 * y_ * lambda) / weight_;
    s.xi = linalg::soft_threshold(arg, threshold_) - y_;
    const Matrix ytxi = y_.transpose() * s.xi;
    s.residual = ytxi + ytxi.transpose();
    s.active = (arg.array().abs() > threshold_).cast<double>().matrix();
    s.norm = s.residual.norm();
    return s;
  }

  // Derivative of the tangency residual in the direction h (symmetric).
  Matrix residual_derivative(const DualState& s, const Matrix& h) const {
    const Matrix dxi = (-2.0 / weight_) * s.active.cwiseProduct(y_ * h);
    const Matrix ytd = y_.transpose() * dxi;
    return ytd + ytd.transpose();
  }

  double gradient_step() const { return weight_ / 4.0; }

 private:
  const Matrix& y_;
  const Matrix& v_;
  double weight_;
  double threshold_;
};

}  // namespace

double l1_norm(const Matrix& x) { return x.cwiseAbs().sum(); }

double eval_prox_model(const Geometry& geometry, const ProxModel& model, const Matrix& eta) {
  double value = (model.grad.array() * eta.array()).sum() + 0.5 * model.weight * eta.squaredNorm();
  if (model.lambda != 0.0) value += model.lambda * l1_norm(geometry.retract(model.x, eta));
  return value;
}

Vector sphere_l1_closed_form(const Vector& x, double lambda) {
  if (!(lambda > 0.0)) {
    throw Error(ErrorKind::NumericalDomain, "sphere_l1_closed_form: lambda must be positive");
  }
  Vector z = linalg::soft_threshold(x, lambda);
  const double nz = z.norm();
  if (nz != 0.0) return z / nz;
  Eigen::Index imax = 0;
  x.cwiseAbs().maxCoeff(&imax);  // first maximal index
  Vector y = Vector::Zero(x.size());
  y(imax) = x(imax) < 0.0 ? -1.0 : 1.0;
  return y;
}

double sphere_prox_objective(const Vector& x, const Vector& xi, double lambda, const Vector& y) {
  return (manifold::sphere_log(x, y) + xi).squaredNorm() / (2.0 * lambda) + y.lpNorm<1>();
}

SphereProxResult sphere_prox_conditional_gradient(const Vector& x, const Vector& xi, double lambda,
                                                  const Vector& y0, double tol, int max_iter) {
  if (!(lambda > 0.0)) {
    throw Error(ErrorKind::NumericalDomain, "sphere prox: lambda must be positive");
  }
  SphereProxResult out;
  Vector y = y0;
  double cos_y = std::clamp(x.dot(y), -1.0, 1.0);
  double xi_y = xi.dot(y);
  Vector best = y;
  double best_value = sphere_prox_objective(x, xi, lambda, y);

  for (int k = 0; k < max_iter; ++k) {
    if (cos_y <= -1.0 + 1e-12) {
      throw Error(ErrorKind::NumericalDomain, "sphere prox: iterate antipodal to the base point");
    }
    const double sin_y = (y - cos_y * x).norm();
    const AngleFactors f = angle_factors(sin_y, cos_y);
    const double s = -f.t + xi_y * f.q;
    const Vector grad_h = (s * x + f.t * xi) / lambda;
    const Vector next = sphere_l1_closed_form(-grad_h, 1.0);

    const double cos_next = std::clamp(x.dot(next), -1.0, 1.0);
    const double xi_next = xi.dot(next);
    const double change = std::max(std::abs(cos_y - cos_next), std::abs(xi_y - xi_next));
    y = next;
    cos_y = cos_next;
    xi_y = xi_next;
    out.iterations = k + 1;

    if (cos_y > -1.0 + 1e-12) {
      const double value = sphere_prox_objective(x, xi, lambda, y);
      if (value < best_value) {
        best_value = value;
        best = y;
      }
    }
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  if (out.converged) {
    if (cos_y <= -1.0 + 1e-12) {
      throw Error(ErrorKind::NumericalDomain, "sphere prox: converged to the antipode");
    }
    out.y = y;
  } else {
    out.y = best;
  }
  return out;
}

ProxSolution oblique_prox(const ProxModel& model, const ObliqueProxOptions& options) {
  const Matrix& x = model.x;
  ProxSolution sol;
  sol.eta = Matrix::Zero(x.rows(), x.cols());

  if (model.lambda == 0.0) {
    // l_x is a quadratic on the tangent space.
    sol.eta = -model.grad / model.weight;
  } else {
    const double lambda_tilde = model.lambda / model.weight;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Vector xj = x.col(j);
      const Vector xi = model.grad.col(j) / model.weight;
      try {
        const SphereProxResult r =
            sphere_prox_conditional_gradient(xj, xi, lambda_tilde, xj, options.tol, options.max_iter);
        sol.inner_iterations = std::max(sol.inner_iterations, r.iterations);
        sol.converged = sol.converged && r.converged;
        if (sphere_prox_objective(xj, xi, lambda_tilde, r.y) <=
            sphere_prox_objective(xj, xi, lambda_tilde, xj)) {
          sol.eta.col(j) = manifold::sphere_log(xj, r.y);
        }
      } catch (const Error& e) {
        throw Error(e.kind(), "oblique prox column " + std::to_string(j) + ": " + e.what());
      }
    }
  }
  const ObliqueGeometry geometry;
  sol.model_value = eval_prox_model(geometry, model, sol.eta);
  return sol;
}

TangentProxResult tangent_constrained_prox(const Matrix& y, const Matrix& v, double weight,
                                           double lambda, double tol, int max_iter) {
  if (y.rows() != v.rows() || y.cols() != v.cols()) {
    throw Error(ErrorKind::BadShape, "tangent_constrained_prox: shape mismatch");
  }
  linalg::require_finite(v, "tangent_constrained_prox");
  const Eigen::Index p = y.cols();
  const SymmetricCoordinates coords(p);
  const TangentDual dual(y, v, weight, lambda);

  DualState state = dual.evaluate(Matrix::Zero(p, p));
  TangentProxResult out;
  out.residual_history.push_back(state.norm);

  int it = 0;
  while (state.norm > tol && it < max_iter) {
    ++it;
    // Generalized Jacobian of the residual, negated so it is positive semidefinite.
    Matrix g(coords.dim(), coords.dim());
    for (Eigen::Index k = 0; k < coords.dim(); ++k) {
      const Matrix h = coords.to_mat(Vector::Unit(coords.dim(), k));
      g.col(k) = -coords.to_vec(dual.residual_derivative(state, h));
    }
    g = 0.5 * (g + g.transpose());
    const double mu = (4.0 / weight) * std::min(1e-2, state.norm);
    g.diagonal().array() += mu;
    const Vector step = g.ldlt().solve(coords.to_vec(state.residual));

    bool accepted = false;
    if (step.allFinite()) {
      const Matrix direction = coords.to_mat(step);
      double alpha = 1.0;
      for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
        DualState trial = dual.evaluate(state.lambda + alpha * direction);
        if (trial.norm < state.norm) {
          state = std::move(trial);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      DualState trial = dual.evaluate(state.lambda + dual.gradient_step() * state.residual);
      if (!(trial.norm <= state.norm)) break;  // stalled
      state = std::move(trial);
    }
    out.residual_history.push_back(state.norm);
  }

  out.xi = state.xi;
  out.multiplier = 2.0 * state.lambda;
  out.iterations = it;
  out.residual = state.norm;
  out.converged = state.norm <= tol;
  return out;
}

ProxSolution stiefel_prox(const ProxModel& model, const StiefelProxOptions& options,
                          StiefelProxTrace* trace) {
  const StiefelGeometry geometry;
  const Matrix& x = model.x;
  Matrix eta = Matrix::Zero(x.rows(), x.cols());
  double value = eval_prox_model(geometry, model, eta);
  if (trace) trace->model_values.push_back(value);

  ProxSolution sol;
  sol.converged = false;
  for (int k = 0; k < options.max_iter; ++k) {
    sol.inner_iterations = k + 1;
    Matrix direction;
    double xi_norm = 0.0;
    try {
      const manifold::PolarTransport transport(x, eta);
      const Matrix v = transport.adjoint_inverse(model.grad + model.weight * eta);
      const TangentProxResult sub = tangent_constrained_prox(
          transport.target(), v, model.weight, model.lambda, options.inner_tol,
          options.inner_max_iter);
      xi_norm = sub.xi.norm();
      sol.kkt_residual = xi_norm;
      if (xi_norm < 1e-14) {
        sol.converged = true;
        break;
      }
      direction = transport.inverse(sub.xi);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularSystem && e.kind() != ErrorKind::NotPositiveDefinite) throw;
      throw Error(ErrorKind::StepTooLong, std::string("stiefel prox: ") + e.what());
    }

    const double decrease = options.sigma * xi_norm * xi_norm;
    double alpha = 1.0;
    int halvings = 0;
    double trial_value = eval_prox_model(geometry, model, eta + direction);
    while (trial_value >= value - decrease * alpha && halvings < options.max_halvings) {
      alpha *= 0.5;
      ++halvings;
      trial_value = eval_prox_model(geometry, model, eta + alpha * direction);
    }
    if (trace) trace->halvings.push_back(halvings);
    if (trial_value >= value - decrease * alpha) break;  // no acceptable step

    eta += alpha * direction;
    value = trial_value;
    if (trace) trace->model_values.push_back(value);
    if (xi_norm < options.tol || alpha * direction.norm() < options.tol) {
      sol.converged = true;
      break;
    }
  }

  const double value_at_zero = eval_prox_model(geometry, model, Matrix::Zero(x.rows(), x.cols()));
  if (value > value_at_zero) {
    eta.setZero();
    value = value_at_zero;
  }
  sol.eta = std::move(eta);
  sol.model_value = value;
  return sol;
}

}  // namespace rpg::prox
