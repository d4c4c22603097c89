#pragma once

#include <cstdint>
#include <string>

#include "rpg/linalg.hpp"
#include "rpg/manifolds.hpp"
#include "rpg/solvers.hpp"

namespace rpg::spca {

enum class Variant {
  ObliqueWeaklyCorrelated,  // ||X^T A^T A X - D^2||_F^2 + lambda ||X||_1 on OB(p, n)
  StiefelScotlass,          // -trace(X^T A^T A X) + lambda ||X||_1 on St(p, n)
};

std::string to_string(Variant v);
/// Accepts "oblique" and "stiefel". Throws ConfigError otherwise.
Variant parse_variant(const std::string& name);
ManifoldKind manifold_of(Variant v);

struct SpcaProblem {
  Matrix a;  // m x n, standardized columns
  double lambda = 0.0;
  Variant variant = Variant::ObliqueWeaklyCorrelated;
  Vector d;  // top p singular values of A (used by the oblique variant)
  Eigen::Index p = 1;

  Eigen::Index n() const { return a.cols(); }
  Eigen::Index m() const { return a.rows(); }
  ManifoldId manifold() const { return {manifold_of(variant), n(), p}; }
};

/// Builds the problem and fills D from the standardized data.
SpcaProblem make_problem(Matrix a, Eigen::Index p, double lambda, Variant variant);

double f_value(const SpcaProblem& prob, const Matrix& x);
Matrix euclidean_grad_f(const SpcaProblem& prob, const Matrix& x);
Matrix riemannian_grad_f(const SpcaProblem& prob, const Matrix& x);
double g_value(const Matrix& x, double lambda);

/// Lower bound of f over the variant's manifold: 0 (oblique) or
/// -p sigma_max(A)^2 (Stiefel).
double f_lower_bound(const SpcaProblem& prob);

/// Shift every column to mean zero and scale it to population standard
/// deviation one. Constant columns are left at zero.
Matrix standardize_columns(Matrix a);

/// N(0, 1) entries, then standardized.
Matrix generate_random_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

/// The five unit-norm component patterns (rows) used by the synthetic data:
/// two boxes, two phase-shifted sinusoid bursts and a triangular ramp, each on
/// its own contiguous fifth of the index range.
Matrix synthetic_components(Eigen::Index n);

/// Each component repeated m / 5 times plus N(0, noise_variance) noise,
/// before standardization. Throws BadShape unless m is a positive multiple of 5.
Matrix synthetic_raw(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                     double noise_variance = 0.25);
Matrix generate_synthetic_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                               double noise_variance = 0.25);

/// Leading p right singular vectors of A; on both OB(p, n) and St(p, n).
Matrix initial_point(const SpcaProblem& prob);

CompositeProblem to_composite(const SpcaProblem& prob);

/// Default constants for the variant. Oblique: L-tilde = 8 ||A||_2^4,
/// estimate = ||A||_2^4, N = 5 in [2, 10]. Stiefel: L-tilde = 2 ||A||_2^2,
/// estimate = 1.6 ||A||_F^2, N = 5 in [3, 5]. Both: tau 1.1, sigma 1e-4,
/// nu 0.5, N_ls 3.
SolverConfig default_solver_config(const SpcaProblem& prob);

}  // namespace rpg::spca
