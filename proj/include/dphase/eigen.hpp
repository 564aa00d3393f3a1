#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "dphase/energy.hpp"
#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/preconditioner.hpp"

namespace dphase {

struct SolverOptions {
  double tol = 1e-10;             // relative objective decrease counted as stalled
  double residual_tol = 1e-8;     // target residual (relative to lam1, or the weak residual)
  double accept_residual = 1e-6;  // weak residual needed to call a Nehari/coercive solve converged
  int max_iter = 50000;
  double step0 = 1.0;
  double armijo_shrink = 0.5;
  double armijo_c = 1e-4;
  double eps_reg = 1e-8;
  unsigned long long seed = 0;
  int restarts = 1;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (!(residual_tol > 0.0)) throw InvalidArgument("residual_tol must be positive");
    if (max_iter < 1) throw InvalidArgument("max_iter must be >= 1");
    if (!(step0 > 0.0)) throw InvalidArgument("step0 must be positive");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0))
      throw InvalidArgument("armijo_shrink must lie in (0, 1)");
    if (!(eps_reg >= 0.0)) throw InvalidArgument("eps_reg must be nonnegative");
    if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  }
};

/// Principal eigenpair of the discrete r-Laplacian.
struct EigenPair {
  double r = 2.0;
  double lam1 = 0.0;
  DiscreteFunction u1;  // lr_norm(u1, r) == 1, sum of values > 0
  int iterations = 0;
  double residual = 0.0;  // L2 norm of A_r(u1) - lam1 |u1|^{r-2} u1
  bool converged = false;
  bool positive = false;
  std::vector<double> history;  // Rayleigh quotient per accepted iterate
};

/// ||Du||_r^r / ||u||_r^r.
inline double rayleigh_quotient(const DiscreteFunction& u, double r) {
  detail::require_exponent(r);
  if (u.is_zero()) throw InvalidArgument("Rayleigh quotient of the zero function");
  return grad_rnorm(u, r) / lr_norm(u, r);
}

/// Positive bump: product of sin(pi x / L) profiles sampled at the interior nodes.
inline DiscreteFunction sine_bump(const Mesh& m) {
  DiscreteFunction u(m);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const auto x = m.coordinates(i);
    double v = std::sin(std::numbers::pi * x[0] / m.extent(0));
    if (m.dim() == 2) v *= std::sin(std::numbers::pi * x[1] / m.extent(1));
    u.values[Eigen::Index(i)] = v;
  }
  return u;
}

inline DiscreteFunction normalized(const DiscreteFunction& u, double r) {
  return u.scaled(1.0 / std::pow(lr_norm(u, r), 1.0 / r));
}

namespace detail {

inline constexpr int kStagnationWindow = 200;

/// Sufficient decrease f_new <= f + c * (directional decrease), with a few ulps of
/// slack so that steps whose decrease is below roundoff are not rejected forever.
inline bool armijo_accepts(double f_new, double f, double predicted, double c) {
  if (!std::isfinite(f_new)) return false;
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
  return f_new <= f + c * predicted + slack;
}

inline double eigen_residual(const DiscreteFunction& u, double r, double lam, double eps) {
  DiscreteFunction res = apply_r_operator(u, r, eps);
  res.values -= lam * nodal_power(u, r, eps).values;
  return l2_norm(res);
}

}  // namespace detail

/// Minimizes the Rayleigh quotient by preconditioned gradient descent with Armijo
/// backtracking, renormalizing to ||u||_r = 1 after every step. Never throws on
/// non-convergence; inspect `converged`.
inline EigenPair principal_eigenpair(const Mesh& mesh, double r, const SolverOptions& opts = {}) {
  detail::require_exponent(r);
  opts.validate();
  const double eps = opts.eps_reg;

  EigenPair out;
  out.r = r;
  DiscreteFunction u = normalized(sine_bump(mesh), r);
  double R = rayleigh_quotient(u, r);
  out.history.push_back(R);

  int it = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (; it < opts.max_iter; ++it) {
    DiscreteFunction grad = apply_r_operator(u, r, eps);
    grad.values -= R * nodal_power(u, r, eps).values;
    const double res = l2_norm(grad);
    if (res <= opts.residual_tol * R) break;
    if (res < 0.5 * best_residual) {
      best_residual = res;
      since_best = 0;
    } else if (++since_best > detail::kStagnationWindow) {
      break;
    }

    const DiffusivityPreconditioner prec(u, {{1.0, r}}, eps);
    Eigen::VectorXd d = -prec.solve(grad.values);
    // d/ds R(u + s d) at s = 0, with ||u||_r = 1
    double slope = r * mesh.node_measure() * grad.values.dot(d);
    if (!(slope < 0.0)) {
      d = -grad.values;
      slope = r * mesh.node_measure() * grad.values.dot(d);
    }

    double s = opts.step0;
    bool accepted = false;
    DiscreteFunction trial(mesh);
    double Rt = R;
    while (s > 1e-14) {
      trial.values = u.values + s * d;
      if (!trial.is_zero()) {
        Rt = rayleigh_quotient(trial, r);
        if (detail::armijo_accepts(Rt, R, s * slope, opts.armijo_c)) {
          accepted = true;
          break;
        }
      }
      s *= opts.armijo_shrink;
    }
    if (!accepted) break;
    u = normalized(trial, r);
    R = Rt;
    out.history.push_back(R);
  }

  if (u.values.sum() < 0.0) u.values = -u.values;
  out.lam1 = rayleigh_quotient(u, r);
  out.u1 = u;
  out.iterations = it;
  out.residual = detail::eigen_residual(u, r, out.lam1, eps);
  out.positive = u.values.minCoeff() > 0.0;
  out.converged = out.residual <= opts.residual_tol * out.lam1 && out.positive;
  return out;
}

/// Throws NonConvergence unless the pair converged.
inline const EigenPair& require_converged(const EigenPair& e) {
  if (!e.converged)
    throw NonConvergence("principal eigenpair did not converge (r = " + std::to_string(e.r) +
                             ", residual = " + std::to_string(e.residual) + ")",
                         e.iterations, e.residual);
  return e;
}

/// K smallest eigenvalues of the discrete Dirichlet Laplacian, ascending, from the
/// closed form (4/h^2) sin^2(k pi h / (2 L)) per axis, summed over axes in 2D.
inline std::vector<double> linear_spectrum(const Mesh& mesh, int K) {
  if (K < 1 || std::size_t(K) > mesh.num_nodes())
    throw InvalidArgument("K must lie in [1, interior node count]");
  const auto axis_values = [&](int a) {
    std::vector<double> v;
    const double h = mesh.h(a);
    for (int k = 1; k <= mesh.n(a); ++k) {
      const double s = std::sin(k * std::numbers::pi * h / (2.0 * mesh.extent(a)));
      v.push_back(4.0 / (h * h) * s * s);
    }
    return v;
  };
  std::vector<double> all = axis_values(0);
  if (mesh.dim() == 2) {
    const auto x = all;
    const auto y = axis_values(1);
    all.clear();
    all.reserve(x.size() * y.size());
    for (double a : x)
      for (double b : y) all.push_back(a + b);
  }
  std::sort(all.begin(), all.end());
  all.resize(std::size_t(K));
  return all;
}

}  // namespace dphase
