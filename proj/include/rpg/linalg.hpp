#pragma once

#include <Eigen/Dense>

namespace rpg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Square matrix that is symmetric by construction: the constructor replaces
/// its argument by (M + M^T) / 2.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(const Matrix& m);

  static SymmetricMatrix identity(Eigen::Index p);

  const Matrix& matrix() const noexcept { return m_; }
  Eigen::Index order() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
};

/// Throws NumericalDomain when any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* where);

/// Solves C Z + Z E = Q for square p x p factors by complex Schur
/// decomposition of C and E (Bartels-Stewart). Throws SingularSystem when C
/// and -E share an eigenvalue (a vanishing pivot of the triangular system) or
/// when the re-substituted residual exceeds 1e-10 max(1, ||Q||_F). A zero Q
/// returns Z = 0 without factoring, even for a singular operator.
Matrix solve_sylvester(const Matrix& c, const Matrix& e, const Matrix& q);

/// Solves C S + S C^T = Q with symmetric Q; the solution is symmetric.
SymmetricMatrix solve_lyapunov(const Matrix& c, const SymmetricMatrix& q);

/// M^{-1/2} for symmetric positive definite M.
/// Throws NotPositiveDefinite when lambda_min <= 1e-14 ||M||_2.
SymmetricMatrix inv_sqrt_spd(const SymmetricMatrix& m);

/// Entrywise sign(x) max(|x| - lambda, 0).
Matrix soft_threshold(const Matrix& x, double lambda);

struct ThinSvd {
  Matrix u;      // m x r
  Vector sigma;  // r, nonincreasing
  Matrix v;      // n x r
};

/// Leading r singular triplets. The first entry of each right singular
/// vector whose magnitude exceeds 1e-12 is made positive, so the result is
/// deterministic.
ThinSvd thin_svd(const Matrix& a, Eigen::Index r);

}  // namespace linalg
}  // namespace rpg
