#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rpg/errors.hpp"
#include "rpg/harness.hpp"
#include "rpg/manifolds.hpp"
#include "rpg/proxmap.hpp"
#include "rpg/random.hpp"
#include "rpg/spca.hpp"

namespace rpg::harness {

using namespace rpg::manifold;
using namespace rpg::prox;

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

Matrix random_point(Rng& rng, ManifoldKind kind, Eigen::Index n, Eigen::Index p) {
  Matrix g = gaussian(rng, n, p);
  if (kind == ManifoldKind::Oblique) {
    for (Eigen::Index j = 0; j < p; ++j) g.col(j).normalize();
    return g;
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, p);
}

Matrix random_tangent(Rng& rng, ManifoldKind kind, const Matrix& x, double scale) {
  Matrix v = project_tangent(kind, x, gaussian(rng, x.rows(), x.cols()));
  return scale * v / v.norm();
}

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

struct Suite {
  std::string name;
  int cases = 0;
  double worst = 0.0;
  double tol = 0.0;
  std::string failure;

  void record(double err) {
    ++cases;
    if (!(err <= worst)) worst = err;
    if (!(err <= tol) && failure.empty()) {
      std::ostringstream os;
      os << "case " << cases << " error " << err << " > " << tol;
      failure = os.str();
    }
  }
};

const Eigen::Index kSizes[][2] = {{5, 1}, {5, 2}, {5, 4}, {20, 1}, {20, 2}, {20, 4}};

Suite retraction_suite(std::uint64_t seed, int cases) {
  Suite s{"retraction: R(0) = x and dR(0) = id", 0, 0.0, 1e-6, {}};
  Rng rng(derive_seed(seed, 1));
  for (const auto kind : {ManifoldKind::Oblique, ManifoldKind::Stiefel}) {
    const auto geom = make_geometry(kind);
    for (const auto& size : kSizes) {
      for (int c = 0; c < cases; ++c) {
        const Matrix x = random_point(rng, kind, size[0], size[1]);
        const Matrix eta = random_tangent(rng, kind, x, 1.0);
        const double h = 1e-6;
        const Matrix fd = (geom->retract(x, h * eta) - geom->retract(x, -h * eta)) / (2.0 * h);
        s.record(std::max((geom->retract(x, Matrix::Zero(x.rows(), x.cols())) - x).norm(), (fd - eta).norm()));
      }
    }
  }
  return s;
}

Suite inverse_retraction_suite(std::uint64_t seed, int cases) {
  Suite s{"inverse retraction round trip", 0, 0.0, 1e-8, {}};
  Rng rng(derive_seed(seed, 2));
  for (const auto kind : {ManifoldKind::Oblique, ManifoldKind::Stiefel}) {
    const auto geom = make_geometry(kind);
    for (const auto& size : kSizes) {
      for (int c = 0; c < cases; ++c) {
        const Matrix x = random_point(rng, kind, size[0], size[1]);
        const Matrix eta = random_tangent(rng, kind, x, 0.8 * rng.uniform());
        s.record((geom->inverse_retract(x, geom->retract(x, eta)) - eta).norm());
      }
    }
  }
  return s;
}

Suite transport_suite(std::uint64_t seed, int cases) {
  Suite s{"polar transport: inverse and adjoint identities", 0, 0.0, 1e-8, {}};
  Rng rng(derive_seed(seed, 3));
  for (const auto& size : kSizes) {
    for (int c = 0; c < cases; ++c) {
      const Matrix x = random_point(rng, ManifoldKind::Stiefel, size[0], size[1]);
      const Matrix eta = random_tangent(rng, ManifoldKind::Stiefel, x, 0.5 * rng.uniform());
      const PolarTransport t(x, eta);
      const Matrix xi = random_tangent(rng, ManifoldKind::Stiefel, x, 1.0);
      const Matrix zeta = random_tangent(rng, ManifoldKind::Stiefel, t.target(), 1.0);
      const double round_trip = std::max((t.inverse(t.transport(xi)) - xi).norm(),
                                         (t.transport(t.inverse(zeta)) - zeta).norm());
      const double adjoint = std::abs(inner(xi, t.inverse(zeta)) - inner(t.adjoint_inverse(xi), zeta));
      s.record(std::max(round_trip, adjoint));
    }
  }
  return s;
}

Suite closed_form_suite(std::uint64_t seed, int cases) {
  // Angular grid on S^1 with spacing 1e-4; the closed form may not lose to it.
  Suite s{"sphere closed form against an S^1 grid", 0, 0.0, 1e-12, {}};
  Rng rng(derive_seed(seed, 4));
  const int steps = static_cast<int>(2.0 * std::numbers::pi / 1e-4);
  for (int c = 0; c < cases; ++c) {
    Vector x(2);
    x << rng.normal(), rng.normal();
    x.normalize();
    const double lambda = 0.05 + 1.5 * rng.uniform();
    auto obj = [&](const Vector& y) { return (y - x).squaredNorm() / (2.0 * lambda) + y.lpNorm<1>(); };
    double grid = std::numeric_limits<double>::infinity();
    Vector y(2);
    for (int k = 0; k < steps; ++k) {
      const double a = 1e-4 * k;
      y << std::cos(a), std::sin(a);
      grid = std::min(grid, obj(y));
    }
    s.record(std::max(0.0, obj(sphere_l1_closed_form(x, lambda)) - grid));
  }
  return s;
}

double kkt_residual(const Matrix& y, const Matrix& v, double weight, double lambda, const Matrix& xi,
                    const Matrix& multiplier) {
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

Suite tangent_prox_suite(std::uint64_t seed, int cases) {
  Suite s{"tangent-constrained prox KKT residual", 0, 0.0, 1e-8, {}};
  Rng rng(derive_seed(seed, 5));
  for (const auto& size : kSizes) {
    for (int c = 0; c < cases; ++c) {
      const Matrix y = random_point(rng, ManifoldKind::Stiefel, size[0], size[1]);
      const Matrix v = gaussian(rng, size[0], size[1]);
      const double w = 1.0 + 5.0 * rng.uniform();
      const double lambda = 0.05 + rng.uniform();
      const auto r = tangent_constrained_prox(y, v, w, lambda);
      s.record(kkt_residual(y, v, w, lambda, r.xi, r.multiplier));
    }
  }
  return s;
}

Suite gradient_suite(std::uint64_t seed, int cases) {
  Suite s{"smooth term: gradient against central differences", 0, 0.0, 1e-5, {}};
  Rng rng(derive_seed(seed, 6));
  for (const auto variant : {spca::Variant::ObliqueWeaklyCorrelated, spca::Variant::StiefelScotlass}) {
    for (int c = 0; c < cases; ++c) {
      const Eigen::Index p = 1 + c % 4;
      const auto prob = spca::make_problem(spca::generate_random_data(20, 12, derive_seed(seed, 7, c)), p, 1.0, variant);
      const Matrix x = random_point(rng, spca::manifold_of(variant), prob.n(), p);
      const Matrix dir = gaussian(rng, prob.n(), p);
      const double h = 1e-5;
      const double fd = (spca::f_value(prob, x + h * dir) - spca::f_value(prob, x - h * dir)) / (2.0 * h);
      const double exact = inner(spca::euclidean_grad_f(prob, x), dir);
      s.record(std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
    }
  }
  return s;
}

}  // namespace

bool validate_properties(std::uint64_t seed, int cases, std::ostream& out) {
  if (cases < 1) throw Error(ErrorKind::ConfigError, "cases must be at least 1");
  const std::vector<std::function<Suite()>> suites = {
      [&] { return retraction_suite(seed, cases); },      [&] { return inverse_retraction_suite(seed, cases); },
      [&] { return transport_suite(seed, cases); },       [&] { return closed_form_suite(seed, cases); },
      [&] { return tangent_prox_suite(seed, cases); },    [&] { return gradient_suite(seed, cases); },
  };
  bool all = true;
  for (const auto& run : suites) {
    Suite s;
    try {
      s = run();
    } catch (const std::exception& e) {
      out << "FAIL  exception: " << e.what() << '\n';
      all = false;
      continue;
    }
    const bool ok = s.failure.empty();
    all = all && ok;
    out << (ok ? "PASS  " : "FAIL  ") << s.name << "  (" << s.cases << " cases, worst " << s.worst << ")";
    if (!ok) out << "  " << s.failure;
    out << '\n';
  }
  return all;
}

}  // namespace rpg::harness
