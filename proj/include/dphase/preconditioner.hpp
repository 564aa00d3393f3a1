#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "dphase/energy.hpp"
#include "dphase/mesh.hpp"

namespace dphase {

/// One weighted r-Laplacian contribution coef * (-Delta_r) to the preconditioner.
struct DiffusionTerm {
  double coef;
  double r;
};

/// Gradient-energy Hessian metric  P = sum_c D_c^T H_c D_c  frozen at the current iterate, with
///   H_c = sum_k coef_k (|g_c|^2 + e^2)^{(r_k-2)/2} [I + (r_k-2) g_c g_c^T / (|g_c|^2 + e^2)],
/// the exact Hessian of sum_k coef_k/r_k sum_c (|g_c|^2 + e^2)^{r_k/2}. P is SPD for every r > 1;
/// at r = 2 it is the five-point (three-point in 1D) Dirichlet Laplacian. Descent directions
/// are -P^{-1} grad, i.e. gradients in a solution-dependent H^1_0 metric.
class DiffusivityPreconditioner {
public:
  DiffusivityPreconditioner(const DiscreteFunction& u, std::initializer_list<DiffusionTerm> terms,
                            double eps)
      : DiffusivityPreconditioner(u, std::vector<DiffusionTerm>(terms), eps) {}

  DiffusivityPreconditioner(const DiscreteFunction& u, const std::vector<DiffusionTerm>& terms,
                            double eps) {
    const Mesh& m = u.mesh;
    const auto n = Eigen::Index(m.num_nodes());

    std::vector<std::array<double, 2>> grads(m.num_cells());
    double gmax = 0.0;
    for_each_cell(m, [&](std::size_t c, const CellStencil& s) {
      grads[c] = detail::stencil_gradient(m, u.values, s);
      gmax = std::max(gmax, std::hypot(grads[c][0], grads[c][1]));
    });
    // Floor keeps weights finite for r < 2 and nonzero for r > 2 where g vanishes.
    const double eps_pc = std::max({eps, 1e-6 * gmax, 1e-300});

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.num_cells() * 9);
    const double hx = m.h(0);
    const double hy = m.h(1);
    for_each_cell(m, [&](std::size_t c, const CellStencil& s) {
      const double gx = grads[c][0];
      const double gy = grads[c][1];
      const double g2 = gx * gx + gy * gy;
      const double s2 = g2 + eps_pc * eps_pc;
      double hxx = 0.0, hxy = 0.0, hyy = 0.0;
      for (const auto& t : terms) {
        const double w = t.coef * detail::flux_weight(g2, t.r, eps_pc);
        const double k = (t.r - 2.0) / s2;
        hxx += w * (1.0 + k * gx * gx);
        hxy += w * k * gx * gy;
        hyy += w * (1.0 + k * gy * gy);
      }
      // D_c rows: d(gx)/du and d(gy)/du as (node, coefficient) pairs.
      const std::array<std::pair<long, double>, 2> dx{{{s.east, 1.0 / hx}, {s.base, -1.0 / hx}}};
      const std::array<std::pair<long, double>, 2> dy{{{s.north, 1.0 / hy}, {s.base, -1.0 / hy}}};
      const auto add = [&](const auto& a, const auto& b, double hab) {
        for (const auto& [i, ci] : a)
          for (const auto& [j, cj] : b)
            if (i >= 0 && j >= 0) trip.emplace_back(i, j, hab * ci * cj);
      };
      add(dx, dx, hxx);
      if (m.dim() == 2) {
        add(dx, dy, hxy);
        add(dy, dx, hxy);
        add(dy, dy, hyy);
      }
    });

    Eigen::SparseMatrix<double> P(n, n);
    P.setFromTriplets(trip.begin(), trip.end());
    solver_.compute(P);
    ok_ = solver_.info() == Eigen::Success;
  }

  /// Solves P x = rhs; falls back to the identity metric if factorization failed.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (!ok_) return rhs;
    Eigen::VectorXd x = solver_.solve(rhs);
    if (!x.allFinite()) return rhs;
    return x;
  }

  bool factorized() const noexcept { return ok_; }

private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool ok_ = false;
};

}  // namespace dphase
