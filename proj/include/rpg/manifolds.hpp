#pragma once

#include <memory>
#include <string>

#include "rpg/linalg.hpp"

namespace rpg {

enum class ManifoldKind { Oblique, Stiefel };

/// OB(p, n): n x p matrices with unit columns. St(p, n): n x p matrices with
/// orthonormal columns.
struct ManifoldId {
  ManifoldKind kind = ManifoldKind::Oblique;
  Eigen::Index n = 1;
  Eigen::Index p = 1;

  /// Throws BadShape unless 1 <= p <= n.
  void validate() const;
  std::string name() const;
};

namespace manifold {

inline constexpr double kPointTol = 1e-10;

bool is_on_manifold(const ManifoldId& id, const Matrix& x, double tol = kPointTol);
bool is_tangent(const ManifoldId& id, const Matrix& x, const Matrix& v, double tol = kPointTol);

/// Orthogonal projection onto T_X under the Euclidean (trace) metric.
Matrix project_tangent(ManifoldKind kind, const Matrix& x, const Matrix& v);

// Unit sphere.
Vector sphere_exp(const Vector& x, const Vector& eta);
/// Throws AntipodalPoints when x^T y <= -1 + 1e-12.
Vector sphere_log(const Vector& x, const Vector& y);

// Oblique manifold: the sphere maps applied column by column.
Matrix oblique_exp(const Matrix& x, const Matrix& eta);
Matrix oblique_log(const Matrix& x, const Matrix& y);

// Stiefel manifold with the polar retraction (X + eta)(I + eta^T eta)^{-1/2}.
Matrix stiefel_retract_polar(const Matrix& x, const Matrix& eta);

/// eta = Y S - X where S solves (X^T Y) S + S (Y^T X) = 2 I. Throws
/// SingularSystem when the system is singular or S is not positive definite
/// (Y is then not the polar retraction of any tangent vector at X).
Matrix stiefel_inverse_retract_polar(const Matrix& x, const Matrix& y);

/// The differentiated polar retraction at a fixed (X, eta) and its inverse
/// and adjoint-inverse. With Y = R_X(eta) and M = Y^T (X + eta), which is
/// (I + eta^T eta)^{1/2} and therefore symmetric positive definite:
///
///   T xi       = Y Omega + (I - Y Y^T) xi M^{-1},
///                M Omega + Omega M = Y^T xi - xi^T Y
///   T^{-1} zeta = Y A + P,  P = (I - Y Y^T) zeta M,
///                X^T Y A + A Y^T X = [(Y^T zeta) M + M (Y^T zeta)] Y^T X - X^T P - P^T X
///   T^{-#} xi  = Y [B X^T Y M + M B X^T Y] - (I - Y Y^T)(X B + X B^T - xi) M,
///                Y^T X B + B X^T Y = Y^T xi
///
/// The adjoint-inverse is additionally projected onto T_Y; the projection
/// leaves <T^{-#} xi, zeta> unchanged for every tangent zeta.
/// Singular Sylvester systems surface as SingularSystem.
class PolarTransport {
 public:
  PolarTransport(const Matrix& x, const Matrix& eta);

  const Matrix& base() const noexcept { return x_; }
  const Matrix& target() const noexcept { return y_; }

  Matrix transport(const Matrix& xi) const;
  Matrix inverse(const Matrix& zeta) const;
  Matrix adjoint_inverse(const Matrix& xi) const;

 private:
  Matrix x_;
  Matrix y_;
  Matrix m_;    // Y^T (X + eta)
  Matrix xty_;  // X^T Y
  Matrix normal_projector_apply(const Matrix& v) const { return v - y_ * (y_.transpose() * v); }
};

Matrix stiefel_transport_diff_retraction(const Matrix& x, const Matrix& eta, const Matrix& xi);
Matrix stiefel_transport_inverse(const Matrix& x, const Matrix& eta, const Matrix& zeta);
Matrix stiefel_transport_adjoint_inverse(const Matrix& x, const Matrix& eta, const Matrix& xi);

}  // namespace manifold

/// Geometry seen by the outer solvers: tangent projection, the retraction and
/// its inverse. The metric is always the Euclidean trace inner product.
class Geometry {
 public:
  virtual ~Geometry() = default;

  virtual std::string name() const = 0;
  virtual bool contains(const Matrix& x, double tol) const = 0;
  virtual Matrix project(const Matrix& x, const Matrix& v) const = 0;
  virtual Matrix retract(const Matrix& x, const Matrix& eta) const = 0;
  virtual Matrix inverse_retract(const Matrix& x, const Matrix& y) const = 0;
};

/// Exponential map and its inverse, column-wise.
class ObliqueGeometry final : public Geometry {
 public:
  std::string name() const override { return "oblique"; }
  bool contains(const Matrix& x, double tol) const override;
  Matrix project(const Matrix& x, const Matrix& v) const override;
  Matrix retract(const Matrix& x, const Matrix& eta) const override;
  Matrix inverse_retract(const Matrix& x, const Matrix& y) const override;
};

/// Polar retraction and its inverse.
class StiefelGeometry final : public Geometry {
 public:
  std::string name() const override { return "stiefel"; }
  bool contains(const Matrix& x, double tol) const override;
  Matrix project(const Matrix& x, const Matrix& v) const override;
  Matrix retract(const Matrix& x, const Matrix& eta) const override;
  Matrix inverse_retract(const Matrix& x, const Matrix& y) const override;
};

std::shared_ptr<const Geometry> make_geometry(ManifoldKind kind);

}  // namespace rpg
