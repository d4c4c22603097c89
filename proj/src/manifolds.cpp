#include "rpg/manifolds.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "rpg/errors.hpp"

namespace rpg {

void ManifoldId::validate() const {
  if (p < 1 || p > n) {
    throw Error(ErrorKind::BadShape, "manifold requires 1 <= p <= n, got n=" + std::to_string(n) +
                                         " p=" + std::to_string(p));
  }
}

std::string ManifoldId::name() const {
  return std::string(kind == ManifoldKind::Oblique ? "OB" : "St") + "(" + std::to_string(p) +
         "," + std::to_string(n) + ")";
}

namespace manifold {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::BadShape, std::string(where) + ": shape mismatch");
  }
}

// theta / sin(theta) given s = sin(theta) and c = cos(theta), theta in [0, pi).
double theta_over_sin(double s, double c) {
  if (s < 1e-8) return 1.0 + s * s / 6.0;
  return std::atan2(s, c) / s;
}

Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

bool is_on_manifold(const ManifoldId& id, const Matrix& x, double tol) {
  if (x.rows() != id.n || x.cols() != id.p || !x.allFinite()) return false;
  if (id.kind == ManifoldKind::Oblique) {
    return ((x.colwise().norm().array() - 1.0).abs() <= tol).all();
  }
  return (x.transpose() * x - Matrix::Identity(id.p, id.p)).norm() <= tol;
}

bool is_tangent(const ManifoldId& id, const Matrix& x, const Matrix& v, double tol) {
  if (v.rows() != id.n || v.cols() != id.p || !v.allFinite()) return false;
  if (id.kind == ManifoldKind::Oblique) {
    return ((x.array() * v.array()).colwise().sum().abs() <= tol).all();
  }
  const Matrix xtv = x.transpose() * v;
  return (xtv + xtv.transpose()).norm() <= tol;
}

Matrix project_tangent(ManifoldKind kind, const Matrix& x, const Matrix& v) {
  require_same_shape(x, v, "project_tangent");
  if (kind == ManifoldKind::Oblique) {
    const Eigen::RowVectorXd inner = (x.array() * v.array()).colwise().sum();
    return v - x * inner.asDiagonal();
  }
  return v - x * sym(x.transpose() * v);
}

Vector sphere_exp(const Vector& x, const Vector& eta) {
  require_same_shape(x, eta, "sphere_exp");
  const double t = eta.norm();
  if (t == 0.0) return x;
  const double sinc = t < 1e-8 ? 1.0 - t * t / 6.0 : std::sin(t) / t;
  Vector y = x * std::cos(t) + eta * sinc;
  return y / y.norm();
}

Vector sphere_log(const Vector& x, const Vector& y) {
  require_same_shape(x, y, "sphere_log");
  const double c = std::clamp(x.dot(y), -1.0, 1.0);
  if (c <= -1.0 + 1e-12) {
    throw Error(ErrorKind::AntipodalPoints, "sphere_log: x^T y = " + std::to_string(c));
  }
  const Vector w = y - c * x;
  return theta_over_sin(w.norm(), c) * w;
}

Matrix oblique_exp(const Matrix& x, const Matrix& eta) {
  require_same_shape(x, eta, "oblique_exp");
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.col(j) = sphere_exp(x.col(j), eta.col(j));
  return y;
}

Matrix oblique_log(const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "oblique_log");
  Matrix eta(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    try {
      eta.col(j) = sphere_log(x.col(j), y.col(j));
    } catch (const Error& e) {
      throw Error(e.kind(), "column " + std::to_string(j) + ": " + e.what());
    }
  }
  return eta;
}

Matrix stiefel_retract_polar(const Matrix& x, const Matrix& eta) {
  require_same_shape(x, eta, "stiefel_retract_polar");
  if (eta.isZero(0.0)) return x;
  // (X + eta)^T (X + eta) equals I + eta^T eta for X on St(p, n) and tangent
  // eta; using the product itself keeps the result orthonormal when X has
  // drifted slightly, instead of amplifying the drift across iterations.
  const Matrix z = x + eta;
  const linalg::SymmetricMatrix gram(z.transpose() * z);
  return z * linalg::inv_sqrt_spd(gram).matrix();
}

Matrix stiefel_inverse_retract_polar(const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "stiefel_inverse_retract_polar");
  const Eigen::Index p = x.cols();
  const linalg::SymmetricMatrix s =
      linalg::solve_lyapunov(x.transpose() * y, linalg::SymmetricMatrix(2.0 * Matrix::Identity(p, p)));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.matrix(), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::SingularSystem,
                "stiefel_inverse_retract_polar: points too far apart (S not positive definite)");
  }
  return y * s.matrix() - x;
}

PolarTransport::PolarTransport(const Matrix& x, const Matrix& eta)
    : x_(x), y_(stiefel_retract_polar(x, eta)) {
  m_ = y_.transpose() * (x + eta);
  xty_ = x_.transpose() * y_;
}

Matrix PolarTransport::transport(const Matrix& xi) const {
  require_same_shape(x_, xi, "stiefel_transport_diff_retraction");
  const Matrix ytxi = y_.transpose() * xi;
  const Matrix omega = linalg::solve_sylvester(m_, m_, ytxi - ytxi.transpose());
  // xi M^{-1} via a solve on the transposed system: (M^T)^{-1} xi^T.
  const Matrix xi_minv = m_.transpose().partialPivLu().solve(xi.transpose()).transpose();
  return y_ * omega + normal_projector_apply(xi_minv);
}

Matrix PolarTransport::inverse(const Matrix& zeta) const {
  require_same_shape(x_, zeta, "stiefel_transport_inverse");
  const Matrix p = normal_projector_apply(zeta) * m_;
  const Matrix ytz = y_.transpose() * zeta;
  const Matrix xtp = x_.transpose() * p;
  const Matrix rhs = (ytz * m_ + m_ * ytz) * xty_.transpose() - xtp - xtp.transpose();
  const Matrix a = linalg::solve_sylvester(xty_, xty_.transpose(), rhs);
  return y_ * a + p;
}

Matrix PolarTransport::adjoint_inverse(const Matrix& xi) const {
  require_same_shape(x_, xi, "stiefel_transport_adjoint_inverse");
  const Matrix b = linalg::solve_sylvester(xty_.transpose(), xty_, y_.transpose() * xi);
  const Matrix bxty = b * xty_;
  const Matrix raw = y_ * (bxty * m_ + m_ * bxty) -
                     normal_projector_apply(x_ * b + x_ * b.transpose() - xi) * m_;
  return project_tangent(ManifoldKind::Stiefel, y_, raw);
}

Matrix stiefel_transport_diff_retraction(const Matrix& x, const Matrix& eta, const Matrix& xi) {
  return PolarTransport(x, eta).transport(xi);
}

Matrix stiefel_transport_inverse(const Matrix& x, const Matrix& eta, const Matrix& zeta) {
  return PolarTransport(x, eta).inverse(zeta);
}

Matrix stiefel_transport_adjoint_inverse(const Matrix& x, const Matrix& eta, const Matrix& xi) {
  return PolarTransport(x, eta).adjoint_inverse(xi);
}

}  // namespace manifold

bool ObliqueGeometry::contains(const Matrix& x, double tol) const {
  return manifold::is_on_manifold({ManifoldKind::Oblique, x.rows(), x.cols()}, x, tol);
}

Matrix ObliqueGeometry::project(const Matrix& x, const Matrix& v) const {
  return manifold::project_tangent(ManifoldKind::Oblique, x, v);
}

Matrix ObliqueGeometry::retract(const Matrix& x, const Matrix& eta) const {
  return manifold::oblique_exp(x, eta);
}

Matrix ObliqueGeometry::inverse_retract(const Matrix& x, const Matrix& y) const {
  return manifold::oblique_log(x, y);
}

bool StiefelGeometry::contains(const Matrix& x, double tol) const {
  return manifold::is_on_manifold({ManifoldKind::Stiefel, x.rows(), x.cols()}, x, tol);
}

Matrix StiefelGeometry::project(const Matrix& x, const Matrix& v) const {
  return manifold::project_tangent(ManifoldKind::Stiefel, x, v);
}

Matrix StiefelGeometry::retract(const Matrix& x, const Matrix& eta) const {
  return manifold::stiefel_retract_polar(x, eta);
}

Matrix StiefelGeometry::inverse_retract(const Matrix& x, const Matrix& y) const {
  return manifold::stiefel_inverse_retract_polar(x, y);
}

std::shared_ptr<const Geometry> make_geometry(ManifoldKind kind) {
  if (kind == ManifoldKind::Oblique) return std::make_shared<ObliqueGeometry>();
  return std::make_shared<StiefelGeometry>();
}

}  // namespace rpg
