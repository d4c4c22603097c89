#include "rpg/spca.hpp"

#include <cmath>
#include <numbers>

#include "rpg/errors.hpp"
#include "rpg/proxmap.hpp"
#include "rpg/random.hpp"

namespace rpg::spca {

namespace {

class SpcaObjective final : public SmoothFunction {
 public:
  explicit SpcaObjective(const SpcaProblem& prob) : prob_(prob) {}
  double value(const Matrix& x) const override { return f_value(prob_, x); }
  Matrix euclidean_gradient(const Matrix& x) const override { return euclidean_grad_f(prob_, x); }

 private:
  SpcaProblem prob_;
};

}  // namespace

std::string to_string(Variant v) {
  return v == Variant::ObliqueWeaklyCorrelated ? "oblique" : "stiefel";
}

Variant parse_variant(const std::string& name) {
  if (name == "oblique") return Variant::ObliqueWeaklyCorrelated;
  if (name == "stiefel") return Variant::StiefelScotlass;
  throw Error(ErrorKind::ConfigError, "unknown variant '" + name + "' (expected oblique or stiefel)");
}

ManifoldKind manifold_of(Variant v) {
  return v == Variant::ObliqueWeaklyCorrelated ? ManifoldKind::Oblique : ManifoldKind::Stiefel;
}

SpcaProblem make_problem(Matrix a, Eigen::Index p, double lambda, Variant variant) {
  if (p < 1 || p > std::min(a.rows(), a.cols())) {
    throw Error(ErrorKind::BadShape, "spca: need 1 <= p <= min(m, n)");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorKind::ConfigError, "spca: lambda must be nonnegative");
  SpcaProblem prob;
  prob.d = linalg::thin_svd(a, p).sigma;
  prob.a = std::move(a);
  prob.lambda = lambda;
  prob.variant = variant;
  prob.p = p;
  return prob;
}

double f_value(const SpcaProblem& prob, const Matrix& x) {
  const Matrix ax = prob.a * x;
  if (prob.variant == Variant::StiefelScotlass) return -ax.squaredNorm();
  Matrix r = ax.transpose() * ax;
  r.diagonal() -= prob.d.cwiseAbs2();
  return r.squaredNorm();
}

Matrix euclidean_grad_f(const SpcaProblem& prob, const Matrix& x) {
  const Matrix ax = prob.a * x;
  if (prob.variant == Variant::StiefelScotlass) return -2.0 * (prob.a.transpose() * ax);
  Matrix r = ax.transpose() * ax;
  r.diagonal() -= prob.d.cwiseAbs2();
  return 4.0 * (prob.a.transpose() * (ax * r));
}

Matrix riemannian_grad_f(const SpcaProblem& prob, const Matrix& x) {
  return manifold::project_tangent(manifold_of(prob.variant), x, euclidean_grad_f(prob, x));
}

double g_value(const Matrix& x, double lambda) { return lambda * prox::l1_norm(x); }

double f_lower_bound(const SpcaProblem& prob) {
  if (prob.variant == Variant::ObliqueWeaklyCorrelated) return 0.0;
  const double smax = linalg::thin_svd(prob.a, 1).sigma(0);
  return -static_cast<double>(prob.p) * smax * smax;
}

Matrix standardize_columns(Matrix a) {
  const auto m = static_cast<double>(a.rows());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    auto col = a.col(j);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / m);
    if (sd > 0.0) col /= sd;
    // one more centering pass removes the rounding left by the first
    col.array() -= col.mean();
  }
  return a;
}

Matrix generate_random_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  if (m < 2 || n < 1) throw Error(ErrorKind::BadShape, "random data: need m >= 2 and n >= 1");
  Rng rng(seed);
  Matrix a(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  return standardize_columns(std::move(a));
}

Matrix synthetic_components(Eigen::Index n) {
  if (n < 5) throw Error(ErrorKind::BadShape, "synthetic data: need n >= 5");
  Matrix pcs = Matrix::Zero(5, n);
  const Eigen::Index width = n / 5;
  for (Eigen::Index c = 0; c < 5; ++c) {
    const Eigen::Index start = c * width;
    const Eigen::Index len = c == 4 ? n - start : width;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double s = (static_cast<double>(i) + 0.5) / static_cast<double>(len);
      double v = 1.0;
      switch (c) {
        case 0:
        case 1: v = 1.0; break;
        case 2: v = std::sin(2.0 * std::numbers::pi * s); break;
        case 3: v = std::cos(2.0 * std::numbers::pi * s); break;
        case 4: v = s; break;
      }
      pcs(c, start + i) = v;
    }
    pcs.row(c).normalize();
  }
  return pcs;
}

Matrix synthetic_raw(Eigen::Index m, Eigen::Index n, std::uint64_t seed, double noise_variance) {
  if (m < 5 || m % 5 != 0) throw Error(ErrorKind::BadShape, "synthetic data: m must be a multiple of 5");
  if (noise_variance < 0.0) throw Error(ErrorKind::ConfigError, "synthetic data: negative noise variance");
  const Matrix pcs = synthetic_components(n);
  const Eigen::Index block = m / 5;
  const double sd = std::sqrt(noise_variance);
  Rng rng(seed);
  Matrix a(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = pcs(i / block, j) + sd * rng.normal();
  }
  return a;
}

Matrix generate_synthetic_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                               double noise_variance) {
  return standardize_columns(synthetic_raw(m, n, seed, noise_variance));
}

Matrix initial_point(const SpcaProblem& prob) { return linalg::thin_svd(prob.a, prob.p).v; }

CompositeProblem to_composite(const SpcaProblem& prob) {
  CompositeProblem c;
  c.geometry = make_geometry(manifold_of(prob.variant));
  c.smooth = std::make_shared<SpcaObjective>(prob);
  if (prob.variant == Variant::ObliqueWeaklyCorrelated) {
    c.prox = std::make_shared<prox::ObliqueProx>();
  } else {
    c.prox = std::make_shared<prox::StiefelProx>();
  }
  c.lambda = prob.lambda;
  return c;
}

SolverConfig default_solver_config(const SpcaProblem& prob) {
  SolverConfig cfg;
  if (prob.variant == Variant::ObliqueWeaklyCorrelated) {
    // f is quartic in A. Where X^T B X = D^2 with orthonormal X (the SVD
    // initial point) the Euclidean Hessian of f is bounded by 8 ||B||_2^2,
    // B = A^T A, so L-tilde = 8 ||A||_2^4; the estimate keeps the 1 : 8 ratio.
    const double smax2 = std::pow(linalg::thin_svd(prob.a, 1).sigma(0), 2);
    cfg.lipschitz_upper = 8.0 * smax2 * smax2;
    cfg.lipschitz_estimate = smax2 * smax2;
    cfg.interval = 5;
    cfg.interval_min = 2;
    cfg.interval_max = 10;
  } else {
    const double smax = linalg::thin_svd(prob.a, 1).sigma(0);
    cfg.lipschitz_upper = 2.0 * smax * smax;
    cfg.lipschitz_estimate = 1.6 * prob.a.squaredNorm();
    cfg.interval = 5;
    cfg.interval_min = 3;
    cfg.interval_max = 5;
    cfg.check_estimate_bound = false;
  }
  cfg.tau = 1.1;
  cfg.sigma = 1e-4;
  cfg.nu = 0.5;
  cfg.linesearch_max = 3;
  return cfg;
}

}  // namespace rpg::spca
