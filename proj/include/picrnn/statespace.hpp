#pragma once

#include "picrnn/reservoir.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace picrnn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Peaceman equivalent radius 0.14 (dx^2 + dy^2)^(1/2).
template <typename Scalar>
Scalar effective_radius(Scalar dx, Scalar dy) {
  using std::sqrt;
  return Scalar(0.14) * sqrt(dx * dx + dy * dy);
}

/// Peaceman productivity index 2 pi K dz / (mu (ln(r_e / r_w) + s)).
/// Throws std::domain_error when the log term is not positive.
template <typename Scalar>
Scalar peaceman_pi(Scalar permeability, Scalar dx, Scalar dy, Scalar dz,
                   Scalar viscosity, Scalar well_radius, Scalar skin) {
  using std::log;
  if (!(permeability > 0) || !(dx > 0) || !(dy > 0) || !(dz > 0) ||
      !(viscosity > 0) || !(well_radius > 0))
    throw std::domain_error("productivity index inputs must be positive");
  const Scalar denom = log(effective_radius(dx, dy) / well_radius) + skin;
  if (!(denom > 0))
    throw std::domain_error("degenerate well: ln(r_e/r_w) + s must be positive");
  return Scalar(2) * std::numbers::pi_v<Scalar> * permeability * dz / (viscosity * denom);
}

template <typename Scalar>
Scalar harmonic_mean(Scalar a, Scalar b) {
  return (a + b) > 0 ? Scalar(2) * a * b / (a + b) : Scalar(0);
}

enum class Axis { X, Y };

/// TPFA face transmissibility between two neighbouring cells.
template <typename Scalar>
Scalar face_transmissibility(Scalar k_left, Scalar k_right, Axis axis,
                             const Grid& grid, Scalar viscosity) {
  if (k_left < 0 || k_right < 0) throw std::domain_error("permeability must be non-negative");
  const Scalar area = axis == Axis::X ? grid.dy * grid.dz : grid.dx * grid.dz;
  const Scalar distance = axis == Axis::X ? grid.dx : grid.dy;
  return area / viscosity * harmonic_mean(k_left, k_right) / distance;
}

/// Discrete state-space model V xdot = T x + B u.
struct StateSpaceSystem {
  Index n = 0;
  Index m = 0;
  Vector accumulation;        // diag(V), m^3/Pa
  SparseMatrix transmissibility;  // T, m^3/(Pa s), includes BHP well sinks
  SparseMatrix control;       // B, n x m
  Vector productivity;        // PI per well (0 for rate wells)
  std::vector<Index> well_cells;
  std::vector<ControlKind> well_kinds;
};

/// Assembles V, T and B by two-point flux approximation with no-flow
/// boundaries and Peaceman wells. Throws std::invalid_argument for an
/// invalid model or two wells sharing a cell.
StateSpaceSystem assemble(const ReservoirModel& model);

/// T 1: -PI at BHP well cells, zero elsewhere (flux rows sum to zero).
Vector row_sums(const StateSpaceSystem& system);

/// u with c subtracted from BHP entries: B shifted_controls(u, c) = B u + c T 1.
Vector shifted_controls(const StateSpaceSystem& system, const Vector& u, double c);

/// r = -V (x_k - x_{k-1}) / dt + T x_k + B u, in m^3/s. T x_k is taken as
/// T (x_k - c) + c T 1 with c = x_k[0], so a uniform field has no flux error.
template <typename DerivedX, typename DerivedXPrev, typename DerivedU>
Vector residual(const StateSpaceSystem& system,
                const Eigen::MatrixBase<DerivedX>& x_k,
                const Eigen::MatrixBase<DerivedXPrev>& x_prev,
                const Eigen::MatrixBase<DerivedU>& u, double dt) {
  if (x_k.size() != system.n || x_prev.size() != system.n || u.size() != system.m)
    throw std::invalid_argument("residual: dimension mismatch");
  if (!(dt > 0)) throw std::invalid_argument("residual: time step must be positive");
  const double c = system.n > 0 ? double(x_k[0]) : 0.0;
  Vector r = system.transmissibility * (x_k.derived().array() - c).matrix();
  r.noalias() += system.control * shifted_controls(system, u, c);
  r.array() -= system.accumulation.array() * (x_k - x_prev).array() / dt;
  return r;
}

/// V/dt - T, the backward-Euler system matrix.
SparseMatrix implicit_matrix(const StateSpaceSystem& system, double dt);

}  // namespace picrnn
