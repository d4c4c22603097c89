#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "rpg/linalg.hpp"
#include "rpg/manifolds.hpp"
#include "rpg/proxmap.hpp"
#include "rpg/random.hpp"
#include "rpg/solvers.hpp"

namespace testsupport {

using rpg::Matrix;
using rpg::Vector;

inline Matrix gaussian(rpg::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

inline Vector unit_vector(rpg::Rng& rng, Eigen::Index n) {
  Vector v = gaussian(rng, n, 1);
  return v / v.norm();
}

inline Matrix random_oblique(rpg::Rng& rng, Eigen::Index n, Eigen::Index p) {
  Matrix x = gaussian(rng, n, p);
  for (Eigen::Index j = 0; j < p; ++j) x.col(j).normalize();
  return x;
}

// Gram-Schmidt twice over, independent of the library's polar code.
inline Matrix random_stiefel(rpg::Rng& rng, Eigen::Index n, Eigen::Index p) {
  Matrix x = gaussian(rng, n, p);
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < j; ++i) x.col(j) -= x.col(i).dot(x.col(j)) * x.col(i);
      x.col(j).normalize();
    }
  }
  return x;
}

inline Matrix random_point(rpg::Rng& rng, rpg::ManifoldKind kind, Eigen::Index n, Eigen::Index p) {
  return kind == rpg::ManifoldKind::Oblique ? random_oblique(rng, n, p) : random_stiefel(rng, n, p);
}

// Tangent vector built by hand (not through project_tangent) with norm `scale`.
inline Matrix random_tangent(rpg::Rng& rng, rpg::ManifoldKind kind, const Matrix& x, double scale) {
  Matrix v = gaussian(rng, x.rows(), x.cols());
  if (kind == rpg::ManifoldKind::Oblique) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) v.col(j) -= x.col(j).dot(v.col(j)) * x.col(j);
  } else {
    const Matrix xtv = x.transpose() * v;
    v -= x * (0.5 * (xtv + xtv.transpose()));
  }
  return v * (scale / v.norm());
}

inline double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

// Smooth quadratic f(X) = 0.5 ||M X - B||_F^2 used by the flat double.
class LeastSquares final : public rpg::SmoothFunction {
 public:
  LeastSquares(Matrix m, Matrix b) : m_(std::move(m)), b_(std::move(b)) {}
  double value(const Matrix& x) const override { return 0.5 * (m_ * x - b_).squaredNorm(); }
  Matrix euclidean_gradient(const Matrix& x) const override { return m_.transpose() * (m_ * x - b_); }
  double lipschitz() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m_.transpose() * m_).eigenvalues().maxCoeff();
  }

 private:
  Matrix m_;
  Matrix b_;
};

// Euclidean space seen through the Geometry interface.
class FlatGeometry final : public rpg::Geometry {
 public:
  std::string name() const override { return "flat"; }
  bool contains(const Matrix& x, double) const override { return x.allFinite(); }
  Matrix project(const Matrix&, const Matrix& v) const override { return v; }
  Matrix retract(const Matrix& x, const Matrix& eta) const override { return x + eta; }
  Matrix inverse_retract(const Matrix& x, const Matrix& y) const override { return y - x; }
};

// Exact Euclidean l1 prox: eta = soft(x - grad / L, lambda / L) - x.
class FlatL1Prox final : public rpg::prox::ProxOperator {
 public:
  rpg::prox::ProxSolution solve(const rpg::prox::ProxModel& m) const override {
    rpg::prox::ProxSolution s;
    Matrix target = m.x - m.grad / m.weight;
    Matrix z = target;
    const double thr = m.lambda / m.weight;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double a = target(i, j);
        z(i, j) = a > thr ? a - thr : (a < -thr ? a + thr : 0.0);
      }
    }
    s.eta = z - m.x;
    return s;
  }
};

// The oblique quadratic f(X) = -sum_j x_j^T B x_j with the exponential map.
// Along x(t) = x cos(wt) + u sin(wt), |d^2/dt^2 x(t)^T B x(t)| is at most
// 2 w^2 (lambda_max - lambda_min), so f o Exp satisfies the descent bound
// with L = 2 (lambda_max - lambda_min). The minimum of f is -p lambda_max.
class ObliqueQuadratic final : public rpg::SmoothFunction {
 public:
  explicit ObliqueQuadratic(Matrix b) : b_(std::move(b)) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b_);
    lmin_ = eig.eigenvalues().minCoeff();
    lmax_ = eig.eigenvalues().maxCoeff();
  }
  double value(const Matrix& x) const override { return -(x.array() * (b_ * x).array()).sum(); }
  Matrix euclidean_gradient(const Matrix& x) const override { return -2.0 * b_ * x; }
  double lipschitz() const { return 2.0 * (lmax_ - lmin_); }
  double lower_bound(Eigen::Index p) const { return -static_cast<double>(p) * lmax_; }

 private:
  Matrix b_;
  double lmin_ = 0.0;
  double lmax_ = 0.0;
};

inline Matrix spd_matrix(rpg::Rng& rng, Eigen::Index n, double spread) {
  const Matrix q = random_stiefel(rng, n, n);
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = 1.0 + spread * static_cast<double>(i) / static_cast<double>(n);
  return q * d.asDiagonal() * q.transpose();
}

// dist(0, v + L xi + lambda d||Y + xi||_1 + Y M) entrywise, plus tangency.
inline double tangent_kkt_residual(const Matrix& y, const Matrix& v, double weight, double lambda,
                                   const Matrix& xi, const Matrix& multiplier) {
  const Matrix g = v + weight * xi + y * multiplier;
  const Matrix point = y + xi;
  double sq = 0.0;
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double r = 0.0;
      if (point(i, j) > 0.0) {
        r = g(i, j) + lambda;
      } else if (point(i, j) < 0.0) {
        r = g(i, j) - lambda;
      } else {
        r = std::max(std::abs(g(i, j)) - lambda, 0.0);
      }
      sq += r * r;
    }
  }
  const Matrix ytxi = y.transpose() * xi;
  return std::sqrt(sq + (ytxi + ytxi.transpose()).squaredNorm());
}

}  // namespace testsupport
