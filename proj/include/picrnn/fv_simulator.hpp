#pragma once

#include "picrnn/statespace.hpp"

#include <stdexcept>
#include <string>

namespace picrnn {

enum class LinearMethod { ConjugateGradient, DenseDirect };

struct SolverConfig {
  double tolerance = 1e-10;  // relative residual ||Ax - b|| / ||b||
  int max_iterations = 20000;
  LinearMethod method = LinearMethod::ConjugateGradient;
  bool jacobi = false;

  void validate() const;
};

/// Raised when a linear solve misses its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Raised by simulate(); carries the states computed before the failure.
class SimulationError : public SolverError {
 public:
  SimulationError(const SolverError& cause, int step, Trajectory partial)
      : SolverError(std::string(cause.what()) + " at step " + std::to_string(step),
                    cause.iterations(), cause.residual()),
        step_(step), partial_(std::move(partial)) {}
  int step() const { return step_; }
  const Trajectory& partial() const { return partial_; }

 private:
  int step_;
  Trajectory partial_;
};

/// Solves A x = b for symmetric positive definite A.
Vector solve_spd(const SparseMatrix& a, const Vector& b, const SolverConfig& cfg);

/// One backward-Euler step: (V/dt - T) x_next = (V/dt) x_k + B u_k.
Vector step(const StateSpaceSystem& system, const Vector& x_k, const Vector& u_k,
            double dt, const SolverConfig& cfg = {});

/// Marches x0 through every step of the schedule; returns t + 1 snapshots.
Trajectory simulate(const StateSpaceSystem& system, const Vector& x0,
                    const ControlSchedule& schedule, const SolverConfig& cfg = {});

/// Per-well rates, m^3/s: PI (p_cell - p_wf) for BHP wells (positive =
/// production), the prescribed control for rate wells.
Vector well_rates(const StateSpaceSystem& system, const Vector& x, const Vector& u);

}  // namespace picrnn
