#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dphase/eigen.hpp"
#include "dphase/energy.hpp"
#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/nehari.hpp"

namespace dphase {

/// Operator coefficients and exponents without lambda.
struct OperatorParams {
  double alpha = 1.0;
  double beta = 1.0;
  double p = 2.0;
  double q = 4.0;
  double eps_reg = 1e-8;

  EnergyParams with_lambda(double lambda) const { return {alpha, beta, p, q, lambda, eps_reg}; }
};

/// beta * discrete lambda_1(q): the left endpoint of the spectrum (beta lambda_1(q), inf).
inline double threshold(const OperatorParams& op, const Mesh& mesh, const SolverOptions& opts = {}) {
  op.with_lambda(1.0).validate();
  const EigenPair e = principal_eigenpair(mesh, op.q, opts);
  return op.beta * require_converged(e).lam1;
}

/// Projectability of the principal q-eigenfunction: lambda ||u1||_q^q - beta ||Du1||_q^q > 0.
/// Exactly the feasibility test used by both branch solvers.
inline bool feasibility_probe(double lambda, double beta, const EigenPair& eigen) {
  return lambda * lr_norm(eigen.u1, eigen.r) - beta * grad_rnorm(eigen.u1, eigen.r) > 0.0;
}

struct ScanRow {
  double lambda = 0.0;
  bool feasible = false;
  std::optional<double> m_lambda;
  std::optional<double> weak_residual;
  std::string error;  // empty when feasible
};

struct SpectrumScan {
  OperatorParams op;
  Mesh mesh;
  double lam1 = 0.0;  // discrete lambda_1(q)
  std::vector<ScanRow> rows;
  std::optional<double> threshold_estimate;  // absent when the grid does not straddle the flip
  double threshold_predicted = 0.0;          // beta * lam1
  bool monotone = true;                      // feasibility flips at most once, false -> true
  std::string note;
};

/// Runs the branch solver at every lambda of a strictly increasing grid, then refines
/// the feasibility flip by bisection with the projectability probe to 1e-4 * lam1.
/// Per-row failures are recorded in the row, never thrown.
inline SpectrumScan scan_lambda(const OperatorParams& op, const Mesh& mesh,
                                const std::vector<double>& lambda_grid,
                                const SolverOptions& opts = {}) {
  op.with_lambda(1.0).validate();
  if (lambda_grid.empty()) throw InvalidArgument("lambda grid is empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0)) throw InvalidArgument("lambda grid must be positive");
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
      throw InvalidArgument("lambda grid must be strictly increasing");
  }

  SpectrumScan scan;
  scan.op = op;
  scan.mesh = mesh;
  const EigenPair eigen = principal_eigenpair(mesh, op.q, opts);
  require_converged(eigen);
  scan.lam1 = eigen.lam1;
  scan.threshold_predicted = op.beta * eigen.lam1;

  for (double lambda : lambda_grid) {
    ScanRow row;
    row.lambda = lambda;
    try {
      const SolveResult res = solve_any(op.with_lambda(lambda), mesh, opts, &eigen);
      row.m_lambda = res.m_lambda;
      row.weak_residual = res.weak_residual;
      row.feasible = res.converged;
      if (!res.converged) row.error = "NonConvergence";
    } catch (const InfeasibleLambda&) {
      row.error = "InfeasibleLambda";
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    scan.rows.push_back(std::move(row));
  }

  std::optional<std::size_t> last_infeasible;
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    if (!scan.rows[i].feasible) last_infeasible = i;
    if (i > 0 && scan.rows[i - 1].feasible && !scan.rows[i].feasible) scan.monotone = false;
  }
  if (!scan.monotone) scan.note = "feasibility is not monotone in lambda (solver anomaly)";

  if (!last_infeasible) {
    scan.note = scan.note.empty() ? "all grid points feasible; threshold below grid" : scan.note;
    return scan;
  }
  if (*last_infeasible + 1 == scan.rows.size()) {
    scan.note = scan.note.empty() ? "no feasible grid point; threshold above grid" : scan.note;
    return scan;
  }
  double lo = scan.rows[*last_infeasible].lambda;
  double hi = scan.rows[*last_infeasible + 1].lambda;
  const double width = 1e-4 * eigen.lam1;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    (feasibility_probe(mid, op.beta, eigen) ? hi : lo) = mid;
  }
  scan.threshold_estimate = 0.5 * (lo + hi);
  return scan;
}

struct BetaSweepEntry {
  double beta;
  double alpha;     // 1 - beta
  double endpoint;  // beta * lam1
};

struct BetaSweep {
  double p = 2.0;
  double q = 2.0;
  Mesh mesh;
  double lam1 = 0.0;
  std::vector<BetaSweepEntry> entries;
  std::vector<double> linear_spectrum_at_one;  // first K Dirichlet Laplacian eigenvalues (q = 2)
};

/// Half-line endpoints beta * lambda_1(q) of the spectrum of -(1-beta) Delta_p - beta Delta_q
/// for beta in (0, 1), plus the discrete spectrum of -Delta at beta = 1 when q = 2.
inline BetaSweep sweep_beta(double p, double q, const Mesh& mesh, const std::vector<double>& betas,
                            int K, const SolverOptions& opts = {}) {
  detail::require_exponent(p);
  detail::require_exponent(q);
  if (p == q) throw InvalidArgument("exponents must satisfy p ≠ q");
  if (K < 0) throw InvalidArgument("K must be nonnegative");
  if (K > 0 && q != 2.0) throw InvalidArgument("the beta = 1 spectrum is only available for q = 2");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("every beta must lie in (0, 1)");

  BetaSweep sweep;
  sweep.p = p;
  sweep.q = q;
  sweep.mesh = mesh;
  sweep.lam1 = require_converged(principal_eigenpair(mesh, q, opts)).lam1;
  for (double b : betas) sweep.entries.push_back({b, 1.0 - b, b * sweep.lam1});
  if (K > 0) sweep.linear_spectrum_at_one = linear_spectrum(mesh, K);
  return sweep;
}

/// Hausdorff distance between the half-lines (a, inf) and (b, inf).
inline double hausdorff_halfline(double a, double b) { return std::abs(a - b); }

}  // namespace dphase
