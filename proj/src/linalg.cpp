#include "rpg/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <complex>
#include <string>

#include "rpg/errors.hpp"

namespace rpg::linalg {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

void require_square(const Matrix& m, Eigen::Index p, const char* where) {
  if (m.rows() != p || m.cols() != p) {
    throw Error(ErrorKind::BadShape, std::string(where) + ": expected " + std::to_string(p) +
                                         "x" + std::to_string(p) + " matrix");
  }
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Matrix& m) : m_(0.5 * (m + m.transpose())) {
  require_square(m, m.rows(), "SymmetricMatrix");
}

SymmetricMatrix SymmetricMatrix::identity(Eigen::Index p) {
  return SymmetricMatrix(Matrix::Identity(p, p));
}

void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::NumericalDomain, std::string(where) + ": non-finite entry");
  }
}

Matrix solve_sylvester(const Matrix& c, const Matrix& e, const Matrix& q) {
  const Eigen::Index p = c.rows();
  if (p < 1) throw Error(ErrorKind::BadShape, "solve_sylvester: empty system");
  require_square(c, p, "solve_sylvester");
  require_square(e, p, "solve_sylvester");
  require_square(q, p, "solve_sylvester");
  require_finite(c, "solve_sylvester");
  require_finite(e, "solve_sylvester");
  require_finite(q, "solve_sylvester");
  // Z = 0 always solves the homogeneous system, singular operator or not.
  if (q.isZero(0.0)) return Matrix::Zero(p, p);

  // C = U T U^*, E = V S V^*  =>  T W + W S = U^* Q V with Z = U W V^*.
  Eigen::ComplexSchur<ComplexMatrix> schur_c(c.cast<std::complex<double>>());
  Eigen::ComplexSchur<ComplexMatrix> schur_e(e.cast<std::complex<double>>());
  const ComplexMatrix& t = schur_c.matrixT();
  const ComplexMatrix& u = schur_c.matrixU();
  const ComplexMatrix& s = schur_e.matrixT();
  const ComplexMatrix& v = schur_e.matrixU();

  ComplexMatrix rhs = u.adjoint() * q.cast<std::complex<double>>() * v;
  ComplexMatrix w(p, p);
  const double scale = std::max({1.0, t.cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff()});
  bool singular_operator = false;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXcd col = rhs.col(j);
    for (Eigen::Index k = 0; k < j; ++k) col -= s(k, j) * w.col(k);
    // back substitution with (T + s_jj I), upper triangular
    for (Eigen::Index i = p - 1; i >= 0; --i) {
      std::complex<double> acc = col(i);
      for (Eigen::Index l = i + 1; l < p; ++l) acc -= t(i, l) * w(l, j);
      const std::complex<double> diag = t(i, i) + s(j, j);
      if (std::abs(diag) <= 1e-14 * scale) {
        singular_operator = true;
        w(i, j) = 0.0;
      } else {
        w(i, j) = acc / diag;
      }
    }
  }
  Matrix z = (u * w * v.adjoint()).real();

  const double residual = (c * z + z * e - q).norm();
  if (singular_operator || !z.allFinite() || residual > 1e-10 * std::max(1.0, q.norm())) {
    throw Error(ErrorKind::SingularSystem,
                "solve_sylvester: residual " + std::to_string(residual) +
                    " (C and -E share an eigenvalue)");
  }
  return z;
}

SymmetricMatrix solve_lyapunov(const Matrix& c, const SymmetricMatrix& q) {
  return SymmetricMatrix(solve_sylvester(c, c.transpose(), q.matrix()));
}

SymmetricMatrix inv_sqrt_spd(const SymmetricMatrix& m) {
  require_finite(m.matrix(), "inv_sqrt_spd");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.matrix());
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalDomain, "inv_sqrt_spd: eigen-decomposition failed");
  }
  const Vector& lambda = eig.eigenvalues();
  const double norm2 = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() <= 1e-14 * norm2 || norm2 == 0.0) {
    throw Error(ErrorKind::NotPositiveDefinite,
                "inv_sqrt_spd: smallest eigenvalue " + std::to_string(lambda.minCoeff()));
  }
  const Matrix& q = eig.eigenvectors();
  return SymmetricMatrix(q * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose());
}

Matrix soft_threshold(const Matrix& x, double lambda) {
  return x.unaryExpr([lambda](double v) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
  });
}

ThinSvd thin_svd(const Matrix& a, Eigen::Index r) {
  if (r < 1 || r > std::min(a.rows(), a.cols())) {
    throw Error(ErrorKind::BadShape, "thin_svd: rank must be in [1, min(m, n)]");
  }
  require_finite(a, "thin_svd");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU().leftCols(r), svd.singularValues().head(r),
              svd.matrixV().leftCols(r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < out.v.rows(); ++i) {
      const double entry = out.v(i, j);
      if (std::abs(entry) > 1e-12) {
        if (entry < 0.0) {
          out.v.col(j) *= -1.0;
          out.u.col(j) *= -1.0;
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace rpg::linalg
