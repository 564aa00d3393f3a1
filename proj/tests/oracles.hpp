#pragma once

// Test-only reference computations. Nothing here calls into the solvers under test.

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace oracle {

/// Dense Dirichlet Laplacian Toeplitz(-1, 2, -1) / h^2 on n interior nodes.
inline Eigen::MatrixXd laplacian_1d(int n, double h) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = 2.0;
    if (i > 0) K(i, i - 1) = -1.0;
    if (i + 1 < n) K(i, i + 1) = -1.0;
  }
  return K / (h * h);
}

/// Five-point Laplacian as the Kronecker sum I (x) Kx + Ky (x) I, x fastest.
inline Eigen::MatrixXd laplacian_2d(int nx, int ny, double hx, double hy) {
  const Eigen::MatrixXd Kx = laplacian_1d(nx, hx);
  const Eigen::MatrixXd Ky = laplacian_1d(ny, hy);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nx * ny, nx * ny);
  for (int j = 0; j < ny; ++j) K.block(j * nx, j * nx, nx, nx) += Kx;
  for (int j = 0; j < ny; ++j)
    for (int k = 0; k < ny; ++k)
      if (Ky(j, k) != 0.0) K.block(j * nx, k * nx, nx, nx) += Ky(j, k) * Eigen::MatrixXd::Identity(nx, nx);
  return K;
}

inline Eigen::VectorXd dense_eigenvalues(const Eigen::MatrixXd& K) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues();
}

/// Value at x = 1 of the solution of -(|u'|^{r-2} u')' = lambda |u|^{r-2} u, u(0) = 0,
/// flux(0) = 1, integrated with classical RK4 in the variables (u, flux).
inline double shoot(double lambda, double r, int steps) {
  const double rp = 1.0 / (r - 1.0);
  const auto rhs = [&](double u, double v, double& du, double& dv) {
    du = std::copysign(std::pow(std::abs(v), rp), v);
    dv = -lambda * std::copysign(std::pow(std::abs(u), r - 1.0), u);
  };
  const double h = 1.0 / steps;
  double u = 0.0, v = 1.0;
  for (int i = 0; i < steps; ++i) {
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    rhs(u, v, k1u, k1v);
    rhs(u + 0.5 * h * k1u, v + 0.5 * h * k1v, k2u, k2v);
    rhs(u + 0.5 * h * k2u, v + 0.5 * h * k2v, k3u, k3v);
    rhs(u + h * k3u, v + h * k3v, k4u, k4v);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return u;
}

/// First Dirichlet eigenvalue of the 1D r-Laplacian on (0, 1) by shooting: march lambda up
/// from `lo` in 2% steps until u(1) changes sign (higher eigenvalues are at least a factor
/// 2 apart, so none is skipped), then bisect.
inline double shooting_eigenvalue(double r, double lo, double hi, int steps = 20000) {
  double a = lo, b = lo;
  while (shoot(b, r, steps) > 0.0) {
    a = b;
    b *= 1.02;
    if (b > hi) return std::numeric_limits<double>::quiet_NaN();
  }
  for (int it = 0; it < 200 && b - a > 1e-13 * b; ++it) {
    const double mid = 0.5 * (a + b);
    (shoot(mid, r, steps) > 0.0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

/// Central difference of f at t = 0.
inline double central_difference(const std::function<double(double)>& f, double delta) {
  return (f(delta) - f(-delta)) / (2.0 * delta);
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace oracle
