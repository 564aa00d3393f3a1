#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dphase/eigen.hpp"
#include "dphase/energy.hpp"
#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/preconditioner.hpp"

namespace dphase {

enum class Branch { nehari, coercive };

inline const char* to_string(Branch b) { return b == Branch::nehari ? "nehari" : "coercive"; }

struct SolveResult {
  Branch branch = Branch::nehari;
  EnergyParams params;
  DiscreteFunction u_hat;
  double m_lambda = 0.0;             // phi_lambda(u_hat)
  double constraint_residual = 0.0;  // |<phi'(u), u>| / (alpha ||Du||_p^p + beta ||Du||_q^q)
  double weak_residual = 0.0;        // verify_eigenpair(u_hat, params)
  double threshold = 0.0;            // beta * discrete lambda_1(q) used by the feasibility probe
  int iterations = 0;
  bool converged = false;
  int sign_changes = 0;
  std::vector<double> trace;      // objective per accepted iterate
  std::vector<double> phi_trace;  // phi_lambda per accepted iterate
};

/// alpha (1/p - 1/q) ||Du||_p^p; equals phi_lambda on the Nehari set.
inline double reduced_energy(const DiscreteFunction& u, const EnergyParams& prm) {
  return prm.alpha * (1.0 / prm.p - 1.0 / prm.q) * grad_rnorm(u, prm.p);
}

/// Scaled defect of the Nehari constraint <phi'(u), u> = 0.
inline double constraint_residual(const DiscreteFunction& u, const EnergyParams& prm) {
  const double gp = prm.alpha * grad_rnorm(u, prm.p);
  const double gq = prm.beta * grad_rnorm(u, prm.q);
  const double scale = gp + gq;
  const double pairing = gp + gq - prm.lambda * lr_norm(u, prm.q);
  return scale > 0.0 ? std::abs(pairing) / scale : std::abs(pairing);
}

/// Scales u onto the Nehari set: t0 u with t0 the unique positive root of
/// t -> alpha t^p ||Du||_p^p + t^q (beta ||Du||_q^q - lambda ||u||_q^q). Requires p < q.
inline DiscreteFunction project(const DiscreteFunction& u, const EnergyParams& prm) {
  if (!(prm.p < prm.q)) throw InvalidArgument("Nehari projection requires p < q");
  if (u.is_zero()) throw InvalidArgument("cannot project the zero function");
  const double gp = prm.alpha * grad_rnorm(u, prm.p);
  const double denom = prm.lambda * lr_norm(u, prm.q) - prm.beta * grad_rnorm(u, prm.q);
  if (!(denom > 0.0))
    throw NotProjectable("direction violates ||Du||_q^q < (lambda/beta) ||u||_q^q");
  const double t0 = std::pow(gp / denom, 1.0 / (prm.q - prm.p));
  return u.scaled(t0);
}

/// Relative weak-form defect ||alpha A_p(u) + beta A_q(u) - lambda |u|^{q-2}u|| / ||lambda |u|^{q-2}u||,
/// unregularized. Accepts alpha = 0 or beta = 0 so single-operator oracles can be checked.
inline double verify_eigenpair(const DiscreteFunction& u, const EnergyParams& prm) {
  prm.validate(/*allow_degenerate=*/true);
  if (u.is_zero()) throw InvalidArgument("verify_eigenpair: u must be nonzero");
  DiscreteFunction rhs = nodal_power(u, prm.q, 0.0);
  rhs.values *= prm.lambda;
  DiscreteFunction lhs(u.mesh);
  if (prm.alpha != 0.0) lhs.values += prm.alpha * apply_r_operator(u, prm.p, 0.0).values;
  if (prm.beta != 0.0) lhs.values += prm.beta * apply_r_operator(u, prm.q, 0.0).values;
  lhs.values -= rhs.values;
  return l2_norm(lhs) / l2_norm(rhs);
}

/// Number of grid edges joining interior nodes of strictly opposite sign.
inline int count_sign_changes(const DiscreteFunction& u) {
  const Mesh& m = u.mesh;
  int count = 0;
  const auto opposite = [&](long a, long b) { return u.values[a] * u.values[b] < 0.0; };
  for_each_cell(m, [&](std::size_t, const CellStencil& s) {
    if (s.base < 0) return;
    if (s.east >= 0 && opposite(s.base, s.east)) ++count;
    if (m.dim() == 2 && s.north >= 0 && opposite(s.base, s.north)) ++count;
  });
  return count;
}

namespace detail {

/// Copy of prm whose regularization width is eps_reg times the iterate's scale
/// (largest cell-gradient or nodal modulus), so the bias it introduces does not
/// depend on the amplitude of u.
inline EnergyParams scaled_regularization(const EnergyParams& prm, const DiscreteFunction& u) {
  EnergyParams out = prm;
  if (prm.eps_reg == 0.0) return out;
  double scale = u.values.cwiseAbs().maxCoeff();
  for (const auto& g : cell_gradients(u).g) scale = std::max(scale, std::hypot(g[0], g[1]));
  out.eps_reg = prm.eps_reg * scale;
  return out;
}

/// Shared descent loop. `objective` evaluates the accepted-iterate objective of a
/// trial point (after `retract`, which may throw NotProjectable to reject a step).
template <class Retract, class Objective>
SolveResult descend(DiscreteFunction u, const EnergyParams& prm, const SolverOptions& opts,
                    Retract retract, Objective objective) {
  SolveResult out;
  out.params = prm;
  const Mesh mesh = u.mesh;
  double J = objective(u);
  out.trace.push_back(J);
  out.phi_trace.push_back(phi(u, prm));

  double last_rel_decrease = std::numeric_limits<double>::infinity();
  double best_residual = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double wr = verify_eigenpair(u, prm);
    if (wr <= opts.residual_tol) break;
    if (last_rel_decrease < opts.tol && wr < 10.0 * opts.residual_tol) break;
    if (wr < 0.5 * best_residual) {
      best_residual = wr;
      since_best = 0;
    } else if (++since_best > kStagnationWindow) {
      break;
    }

    const EnergyParams reg = scaled_regularization(prm, u);
    const DiscreteFunction g = phi_grad(u, reg);
    const DiffusivityPreconditioner prec(u, {{prm.alpha, prm.p}, {prm.beta, prm.q}}, reg.eps_reg);
    Eigen::VectorXd d = -prec.solve(g.values);
    double slope = mesh.node_measure() * g.values.dot(d);
    if (!(slope < 0.0)) {
      d = -g.values;
      slope = mesh.node_measure() * g.values.dot(d);
    }

    double s = opts.step0;
    bool accepted = false;
    DiscreteFunction trial(mesh);
    double Jt = J;
    while (s > 1e-14) {
      try {
        trial = retract(DiscreteFunction(mesh, Eigen::VectorXd(u.values + s * d)));
        Jt = objective(trial);
        if (armijo_accepts(Jt, J, s * slope, opts.armijo_c)) {
          accepted = true;
          break;
        }
      } catch (const NotProjectable&) {
      }
      s *= opts.armijo_shrink;
    }
    if (!accepted) break;
    last_rel_decrease = (J - Jt) / std::max(std::abs(J), std::numeric_limits<double>::min());
    u = trial;
    J = Jt;
    out.trace.push_back(J);
    out.phi_trace.push_back(phi(u, prm));
  }

  out.u_hat = u;
  out.iterations = it;
  out.m_lambda = phi(u, prm);
  out.constraint_residual = constraint_residual(u, prm);
  out.weak_residual = verify_eigenpair(u, prm);
  out.sign_changes = count_sign_changes(u);
  return out;
}

inline std::vector<DiscreteFunction> perturbed_starts(const DiscreteFunction& base,
                                                      const SolverOptions& opts) {
  std::vector<DiscreteFunction> starts{base};
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> factor(0.5, 1.5);
  for (int k = 1; k < opts.restarts; ++k) {
    DiscreteFunction v = base;
    for (Eigen::Index i = 0; i < v.values.size(); ++i) v.values[i] *= factor(rng);
    starts.push_back(std::move(v));
  }
  return starts;
}

inline std::string threshold_message(const EnergyParams& prm, double threshold) {
  return "lambda = " + std::to_string(prm.lambda) +
         " is not above the discrete threshold beta * lambda_1(q) = " + std::to_string(threshold);
}

}  // namespace detail

/// Minimizes phi_lambda over the Nehari set (branch p < q). Descends along
/// preconditioned gradients of phi_lambda, reprojecting every trial point, with
/// Armijo backtracking on the reduced energy alpha (1/p - 1/q) ||Du||_p^p.
/// Throws InfeasibleLambda when the principal q-eigenfunction is not projectable.
/// `eigen` may supply a precomputed principal pair for r = q on the same mesh.
inline SolveResult solve(const EnergyParams& prm, const Mesh& mesh, const SolverOptions& opts = {},
                         const EigenPair* eigen = nullptr) {
  prm.validate();
  opts.validate();
  if (!(prm.p < prm.q)) throw InvalidArgument("solve (Nehari branch) requires p < q");

  std::optional<EigenPair> own;
  if (eigen == nullptr || eigen->r != prm.q || !(eigen->u1.mesh == mesh)) {
    own = principal_eigenpair(mesh, prm.q, opts);
    eigen = &*own;
  }
  require_converged(*eigen);
  const double threshold = prm.beta * eigen->lam1;

  DiscreteFunction start;
  try {
    start = project(eigen->u1, prm);
  } catch (const NotProjectable&) {
    throw InfeasibleLambda(detail::threshold_message(prm, threshold), threshold);
  }

  std::optional<SolveResult> best;
  for (const auto& init : detail::perturbed_starts(start, opts)) {
    DiscreteFunction u0;
    try {
      u0 = project(init, prm);
    } catch (const NotProjectable&) {
      continue;
    }
    auto res = detail::descend(
        u0, prm, opts, [&](const DiscreteFunction& v) { return project(v, prm); },
        [&](const DiscreteFunction& v) { return reduced_energy(v, prm); });
    if (!best || res.m_lambda < best->m_lambda) best = std::move(res);
  }
  best->branch = Branch::nehari;
  best->threshold = threshold;
  best->converged = best->weak_residual < opts.accept_residual && best->m_lambda > 0.0;
  return *best;
}

/// Directly minimizes the coercive energy phi_lambda (branch q < p), starting from
/// t * u1(q) with phi_lambda(t u1) < 0. Throws InfeasibleLambda when no t in (0, 1]
/// gives negative energy along u1(q).
inline SolveResult solve_coercive(const EnergyParams& prm, const Mesh& mesh,
                                  const SolverOptions& opts = {},
                                  const EigenPair* eigen = nullptr) {
  prm.validate();
  opts.validate();
  if (!(prm.q < prm.p)) throw InvalidArgument("solve_coercive requires q < p");

  std::optional<EigenPair> own;
  if (eigen == nullptr || eigen->r != prm.q || !(eigen->u1.mesh == mesh)) {
    own = principal_eigenpair(mesh, prm.q, opts);
    eigen = &*own;
  }
  require_converged(*eigen);
  const double threshold = prm.beta * eigen->lam1;
  const DiscreteFunction& u1 = eigen->u1;

  bool negative = false;
  for (double t = 1.0; t > 0.0 && !negative; t *= 0.5) {
    if (phi(u1.scaled(t), prm) < 0.0) negative = true;
  }
  if (!negative) throw InfeasibleLambda(detail::threshold_message(prm, threshold), threshold);

  // phi(t u1) = alpha/p t^p ||Du1||_p^p - t^q (lambda ||u1||_q^q - beta ||Du1||_q^q) / q is minimal at t*.
  const double gain = prm.lambda * lr_norm(u1, prm.q) - prm.beta * grad_rnorm(u1, prm.q);
  if (!(gain > 0.0)) throw InfeasibleLambda(detail::threshold_message(prm, threshold), threshold);
  const double t_star = std::pow(gain / (prm.alpha * grad_rnorm(u1, prm.p)), 1.0 / (prm.p - prm.q));
  const DiscreteFunction start = u1.scaled(t_star);

  std::optional<SolveResult> best;
  for (const auto& init : detail::perturbed_starts(start, opts)) {
    auto res = detail::descend(
        init, prm, opts, [](const DiscreteFunction& v) { return v; },
        [&](const DiscreteFunction& v) { return phi(v, prm); });
    if (!best || res.m_lambda < best->m_lambda) best = std::move(res);
  }
  best->branch = Branch::coercive;
  best->threshold = threshold;
  best->converged = best->weak_residual < opts.accept_residual && best->m_lambda < 0.0;
  return *best;
}

/// Dispatches on the exponents: p < q -> Nehari minimization, q < p -> coercive.
inline SolveResult solve_any(const EnergyParams& prm, const Mesh& mesh,
                             const SolverOptions& opts = {}, const EigenPair* eigen = nullptr) {
  prm.validate();
  return prm.p < prm.q ? solve(prm, mesh, opts, eigen) : solve_coercive(prm, mesh, opts, eigen);
}

}  // namespace dphase
