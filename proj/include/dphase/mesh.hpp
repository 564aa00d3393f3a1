#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dphase/errors.hpp"

namespace dphase {

/// Uniform tensor grid on an interval [0, Lx] or rectangle [0, Lx] x [0, Ly].
/// Only interior nodes carry unknowns; boundary values are implicitly zero.
/// Interior nodes are ordered lexicographically with x fastest.
class Mesh {
public:
  Mesh() = default;

  Mesh(int dim, std::array<int, 2> n, std::array<double, 2> extent) : dim_(dim) {
    if (dim != 1 && dim != 2)
      throw InvalidArgument("mesh dimension must be 1 or 2, got " + std::to_string(dim));
    for (int a = 0; a < dim; ++a) {
      if (n[a] < 1)
        throw InvalidArgument("interior node count must be >= 1 on every axis");
      if (!(extent[a] > 0.0))
        throw InvalidArgument("domain extent must be positive on every axis");
    }
    if (dim == 1) {
      n[1] = 1;
      extent[1] = 1.0;
    }
    n_ = n;
    extent_ = extent;
    for (int a = 0; a < 2; ++a) h_[a] = extent_[a] / (n_[a] + 1);
    if (dim == 1) h_[1] = 1.0;
  }

  int dim() const noexcept { return dim_; }
  int n(int axis = 0) const noexcept { return n_[axis]; }
  double extent(int axis = 0) const noexcept { return extent_[axis]; }
  double h(int axis = 0) const noexcept { return h_[axis]; }

  std::size_t num_nodes() const noexcept {
    return dim_ == 1 ? std::size_t(n_[0]) : std::size_t(n_[0]) * std::size_t(n_[1]);
  }
  std::size_t num_cells() const noexcept {
    return dim_ == 1 ? std::size_t(n_[0] + 1)
                     : std::size_t(n_[0] + 1) * std::size_t(n_[1] + 1);
  }

  /// Quadrature weight of a node (h or hx*hy); equals the cell measure.
  double node_measure() const noexcept { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }
  double cell_measure() const noexcept { return node_measure(); }

  /// Physical coordinates of interior node `index`.
  std::array<double, 2> coordinates(std::size_t index) const {
    if (dim_ == 1) return {h_[0] * double(index + 1), 0.0};
    const auto i = index % std::size_t(n_[0]);
    const auto j = index / std::size_t(n_[0]);
    return {h_[0] * double(i + 1), h_[1] * double(j + 1)};
  }

  bool operator==(const Mesh&) const = default;

private:
  int dim_ = 1;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> extent_{1.0, 1.0};
  std::array<double, 2> h_{0.5, 1.0};
};

inline Mesh build_mesh(int dim, std::array<int, 2> n, std::array<double, 2> extent = {1.0, 1.0}) {
  return Mesh(dim, n, extent);
}

inline Mesh build_mesh_1d(int n, double extent = 1.0) { return Mesh(1, {n, 1}, {extent, 1.0}); }

/// Interior nodal values of a scalar field on a Mesh.
struct DiscreteFunction {
  Mesh mesh;
  Eigen::VectorXd values;

  DiscreteFunction() = default;
  explicit DiscreteFunction(const Mesh& m) : mesh(m), values(Eigen::VectorXd::Zero(Eigen::Index(m.num_nodes()))) {}
  DiscreteFunction(const Mesh& m, Eigen::VectorXd v) : mesh(m), values(std::move(v)) {
    if (std::size_t(values.size()) != mesh.num_nodes())
      throw InvalidArgument("value count " + std::to_string(values.size()) +
                            " does not match mesh interior node count " +
                            std::to_string(mesh.num_nodes()));
  }
  DiscreteFunction(const Mesh& m, const std::vector<double>& v)
      : DiscreteFunction(m, Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()))) {}

  std::size_t size() const noexcept { return std::size_t(values.size()); }
  bool is_zero() const { return values.size() == 0 || values.cwiseAbs().maxCoeff() == 0.0; }

  DiscreteFunction scaled(double t) const { return {mesh, Eigen::VectorXd(t * values)}; }
};

/// Gradient stencil of one cell: the lower-left ("base") corner and its east and
/// north neighbours as interior indices, -1 when the corner lies on the boundary.
struct CellStencil {
  long base = -1;
  long east = -1;
  long north = -1;
};

namespace detail {

inline long interior_index(const Mesh& m, long I, long J) {
  // I, J are full-grid node indices including the boundary ring.
  if (I < 1 || I > m.n(0)) return -1;
  if (m.dim() == 1) return I - 1;
  if (J < 1 || J > m.n(1)) return -1;
  return (I - 1) + (J - 1) * long(m.n(0));
}

}  // namespace detail

/// Calls f(cell_index, stencil) for every cell in lexicographic order (x fastest).
template <class F>
void for_each_cell(const Mesh& m, F&& f) {
  if (m.dim() == 1) {
    for (long i = 0; i <= m.n(0); ++i)
      f(std::size_t(i), CellStencil{detail::interior_index(m, i, 0),
                                    detail::interior_index(m, i + 1, 0), -1});
    return;
  }
  std::size_t c = 0;
  for (long j = 0; j <= m.n(1); ++j)
    for (long i = 0; i <= m.n(0); ++i, ++c)
      f(c, CellStencil{detail::interior_index(m, i, j), detail::interior_index(m, i + 1, j),
                       detail::interior_index(m, i, j + 1)});
}

namespace detail {

inline double value_at(const Eigen::VectorXd& u, long idx) { return idx < 0 ? 0.0 : u[idx]; }

inline std::array<double, 2> stencil_gradient(const Mesh& m, const Eigen::VectorXd& u,
                                              const CellStencil& s) {
  const double b = value_at(u, s.base);
  const double gx = (value_at(u, s.east) - b) / m.h(0);
  const double gy = m.dim() == 2 ? (value_at(u, s.north) - b) / m.h(1) : 0.0;
  return {gx, gy};
}

}  // namespace detail

struct CellGradients {
  std::vector<std::array<double, 2>> g;  // second component unused in 1D
  double measure = 0.0;
};

/// Forward-difference gradient on every cell, with zero boundary values.
inline CellGradients cell_gradients(const DiscreteFunction& u) {
  CellGradients out;
  out.measure = u.mesh.cell_measure();
  out.g.resize(u.mesh.num_cells());
  for_each_cell(u.mesh, [&](std::size_t c, const CellStencil& s) {
    out.g[c] = detail::stencil_gradient(u.mesh, u.values, s);
  });
  return out;
}

}  // namespace dphase
