#pragma once

#include <cmath>
#include <string>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"

namespace dphase {

/// Coefficients of -alpha Delta_p u - beta Delta_q u = lambda |u|^{q-2} u.
struct EnergyParams {
  double alpha = 1.0;
  double beta = 1.0;
  double p = 2.0;
  double q = 4.0;
  double lambda = 1.0;
  double eps_reg = 1e-8;  // operator/gradient assembly only; energies stay exact

  /// Throws InvalidArgument unless alpha, beta, lambda > 0, p, q in (1, inf), p != q.
  /// `allow_degenerate` admits alpha = 0 or beta = 0 and p == q; it exists for
  /// verification harnesses that compare against single-operator oracles.
  void validate(bool allow_degenerate = false) const {
    const auto fail = [](const std::string& m) { throw InvalidArgument(m); };
    if (!(p > 1.0) || !std::isfinite(p)) fail("p must lie in (1, inf)");
    if (!(q > 1.0) || !std::isfinite(q)) fail("q must lie in (1, inf)");
    if (!(lambda > 0.0)) fail("lambda must be positive");
    if (!(eps_reg >= 0.0)) fail("eps_reg must be nonnegative");
    if (allow_degenerate) {
      if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be nonnegative");
      return;
    }
    if (!(alpha > 0.0)) fail("alpha must be positive");
    if (!(beta > 0.0)) fail("beta must be positive");
    if (p == q) fail("exponents must satisfy p ≠ q");
  }
};

namespace detail {

inline void require_exponent(double r) {
  if (!(r > 1.0)) throw InvalidArgument("exponent r must exceed 1, got " + std::to_string(r));
}

/// (|g|^2 + eps^2)^{(r-2)/2}; the flux weight. Zero when |g| = eps = 0 so that
/// the flux weight * g vanishes for every r > 1.
inline double flux_weight(double g2, double r, double eps) {
  const double s = g2 + eps * eps;
  if (s == 0.0) return 0.0;
  if (r == 2.0) return 1.0;
  return std::pow(s, 0.5 * (r - 2.0));
}

inline double norm_pow(double g2, double r) {
  if (r == 2.0) return g2;
  return std::pow(g2, 0.5 * r);
}

}  // namespace detail

/// Discrete ||Du||_r^r: sum over cells of measure * |g_cell|^r.
inline double grad_rnorm(const DiscreteFunction& u, double r) {
  detail::require_exponent(r);
  const Mesh& m = u.mesh;
  double sum = 0.0;
  for_each_cell(m, [&](std::size_t, const CellStencil& s) {
    const auto g = detail::stencil_gradient(m, u.values, s);
    sum += detail::norm_pow(g[0] * g[0] + g[1] * g[1], r);
  });
  return m.cell_measure() * sum;
}

/// Discrete ||u||_r^r by nodal quadrature (the r-th power, not the root).
inline double lr_norm(const DiscreteFunction& u, double r) {
  if (!(r >= 1.0)) throw InvalidArgument("lr_norm exponent must be >= 1");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u.values.size(); ++i) sum += std::pow(std::abs(u.values[i]), r);
  return u.mesh.node_measure() * sum;
}

/// Discrete L2 pairing sum_i (node measure) a_i b_i.
inline double inner(const DiscreteFunction& a, const DiscreteFunction& b) {
  return a.mesh.node_measure() * a.values.dot(b.values);
}

inline double l2_norm(const DiscreteFunction& a) { return std::sqrt(inner(a, a)); }

/// phi_lambda(u) = alpha/p ||Du||_p^p + beta/q ||Du||_q^q - lambda/q ||u||_q^q.
inline double phi(const DiscreteFunction& u, const EnergyParams& prm) {
  return prm.alpha / prm.p * grad_rnorm(u, prm.p) + prm.beta / prm.q * grad_rnorm(u, prm.q) -
         prm.lambda / prm.q * lr_norm(u, prm.q);
}

/// <phi'_lambda(u), u> = alpha ||Du||_p^p + beta ||Du||_q^q - lambda ||u||_q^q.
inline double phi_pairing(const DiscreteFunction& u, const EnergyParams& prm) {
  return prm.alpha * grad_rnorm(u, prm.p) + prm.beta * grad_rnorm(u, prm.q) -
         prm.lambda * lr_norm(u, prm.q);
}

/// Discrete A_r(u): the nodal vector v with <A_r(u), h> = sum_c m_c F(g_c) . Dh_c,
/// F(g) = (|g|^2 + eps^2)^{(r-2)/2} g, expressed per unit node measure.
inline DiscreteFunction apply_r_operator(const DiscreteFunction& u, double r, double eps) {
  detail::require_exponent(r);
  const Mesh& m = u.mesh;
  DiscreteFunction v(m);
  const double hx = m.h(0);
  const double hy = m.h(1);
  for_each_cell(m, [&](std::size_t, const CellStencil& s) {
    const auto g = detail::stencil_gradient(m, u.values, s);
    const double w = detail::flux_weight(g[0] * g[0] + g[1] * g[1], r, eps);
    const double fx = w * g[0];
    const double fy = w * g[1];
    if (s.east >= 0) v.values[s.east] += fx / hx;
    if (s.base >= 0) v.values[s.base] -= fx / hx;
    if (m.dim() == 2) {
      if (s.north >= 0) v.values[s.north] += fy / hy;
      if (s.base >= 0) v.values[s.base] -= fy / hy;
    }
  });
  // cell measure / node measure == 1 on a uniform grid
  return v;
}

/// |u|^{r-2} u nodewise; for r < 2 the modulus is regularized as (u^2 + eps^2)^{1/2}.
inline DiscreteFunction nodal_power(const DiscreteFunction& u, double r, double eps) {
  DiscreteFunction v(u.mesh);
  for (Eigen::Index i = 0; i < u.values.size(); ++i) {
    const double x = u.values[i];
    if (r == 2.0) {
      v.values[i] = x;
    } else if (r < 2.0) {
      const double s = x * x + eps * eps;
      v.values[i] = s == 0.0 ? 0.0 : std::pow(s, 0.5 * (r - 2.0)) * x;
    } else {
      v.values[i] = std::pow(std::abs(x), r - 2.0) * x;
    }
  }
  return v;
}

/// L2-type gradient of phi_lambda: directional derivatives are inner(phi_grad(u), h).
inline DiscreteFunction phi_grad(const DiscreteFunction& u, const EnergyParams& prm) {
  DiscreteFunction g(u.mesh);
  if (prm.alpha != 0.0) g.values += prm.alpha * apply_r_operator(u, prm.p, prm.eps_reg).values;
  if (prm.beta != 0.0) g.values += prm.beta * apply_r_operator(u, prm.q, prm.eps_reg).values;
  g.values -= prm.lambda * nodal_power(u, prm.q, prm.eps_reg).values;
  return g;
}

}  // namespace dphase
