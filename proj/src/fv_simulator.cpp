#include "picrnn/fv_simulator.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include <sstream>

namespace picrnn {

void SolverConfig::validate() const {
  if (!(tolerance > 0 && tolerance < 1))
    throw std::invalid_argument("solver tolerance must lie in (0, 1)");
  if (max_iterations < 1) throw std::invalid_argument("solver max iterations must be >= 1");
}

namespace {

constexpr Index kDenseLimit = 1024;

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double bnorm = b.norm();
  const double rnorm = (a * x - b).norm();
  return bnorm > 0 ? rnorm / bnorm : rnorm;
}

template <typename Preconditioner>
Vector conjugate_gradient(const SparseMatrix& a, const Vector& b, const SolverConfig& cfg) {
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Preconditioner> cg;
  cg.setTolerance(cfg.tolerance);
  cg.setMaxIterations(cfg.max_iterations);
  cg.compute(a);
  Vector x = cg.solve(b);
  double achieved = relative_residual(a, x, b);
  Index iterations = cg.iterations();
  // the recursive CG residual can drift from the true one; restart from x
  for (int restart = 0; restart < 3 && cg.info() == Eigen::Success && !(achieved <= cfg.tolerance);
       ++restart) {
    x = cg.solveWithGuess(b, x);
    achieved = relative_residual(a, x, b);
    iterations += cg.iterations();
  }
  if (cg.info() != Eigen::Success || !(achieved <= cfg.tolerance)) {
    std::ostringstream msg;
    msg << "conjugate gradient did not converge: relative residual " << achieved
        << " after " << iterations << " iterations";
    throw SolverError(msg.str(), int(iterations), achieved);
  }
  return x;
}

class StepSolver {
 public:
  StepSolver(const StateSpaceSystem& system, double dt, const SolverConfig& cfg)
      : system_(system), dt_(dt), cfg_(cfg), a_(implicit_matrix(system, dt)) {
    cfg_.validate();
    if (!(dt > 0)) throw std::invalid_argument("time step must be positive");
    if (cfg_.method == LinearMethod::DenseDirect) {
      if (system.n > kDenseLimit)
        throw std::invalid_argument("dense-direct solve limited to n <= 1024");
      llt_.compute(Eigen::MatrixXd(a_));
      if (llt_.info() != Eigen::Success)
        throw SolverError("implicit matrix is not positive definite", 0, 0.0);
    }
  }

  Vector advance(const Vector& x_k, const Vector& u_k) const {
    if (x_k.size() != system_.n || u_k.size() != system_.m)
      throw std::invalid_argument("step: dimension mismatch");
    Vector rhs = system_.accumulation.cwiseProduct(x_k) / dt_;
    rhs.noalias() += system_.control * u_k;
    if (cfg_.method == LinearMethod::DenseDirect) return llt_.solve(rhs);
    return solve_spd(a_, rhs, cfg_);
  }

 private:
  const StateSpaceSystem& system_;
  double dt_;
  SolverConfig cfg_;
  SparseMatrix a_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

Vector solve_spd(const SparseMatrix& a, const Vector& b, const SolverConfig& cfg) {
  cfg.validate();
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  if (b.isZero(0.0)) return Vector::Zero(b.size());

  if (cfg.method == LinearMethod::DenseDirect) {
    if (a.rows() > kDenseLimit) throw std::invalid_argument("dense-direct solve limited to n <= 1024");
    Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(a)};
    if (llt.info() != Eigen::Success) throw SolverError("matrix is not positive definite", 0, 0.0);
    Vector x = llt.solve(b);
    return x;
  }
  if (cfg.jacobi) return conjugate_gradient<Eigen::DiagonalPreconditioner<double>>(a, b, cfg);
  return conjugate_gradient<Eigen::IdentityPreconditioner>(a, b, cfg);
}

Vector step(const StateSpaceSystem& system, const Vector& x_k, const Vector& u_k,
            double dt, const SolverConfig& cfg) {
  return StepSolver(system, dt, cfg).advance(x_k, u_k);
}

Trajectory simulate(const StateSpaceSystem& system, const Vector& x0,
                    const ControlSchedule& schedule, const SolverConfig& cfg) {
  if (x0.size() != system.n) throw std::invalid_argument("simulate: initial state has wrong length");
  if (schedule.num_steps() < 1) throw std::invalid_argument("simulate: empty schedule");
  if (schedule.num_wells() != system.m)
    throw std::invalid_argument("simulate: schedule well count does not match system");

  Trajectory traj;
  traj.dt = schedule.dt();
  traj.provenance = Provenance::FiniteVolume;
  traj.states.reserve(std::size_t(schedule.num_steps()) + 1);
  traj.states.push_back(x0);

  const StepSolver solver(system, schedule.dt(), cfg);
  for (int k = 0; k < schedule.num_steps(); ++k) {
    try {
      traj.states.push_back(solver.advance(traj.states.back(), schedule.control_at(k)));
    } catch (const SolverError& e) {
      throw SimulationError(e, k, traj);
    }
  }
  return traj;
}

Vector well_rates(const StateSpaceSystem& system, const Vector& x, const Vector& u) {
  if (x.size() != system.n || u.size() != system.m)
    throw std::invalid_argument("well_rates: dimension mismatch");
  Vector q(system.m);
  for (Index w = 0; w < system.m; ++w) {
    if (system.well_kinds[std::size_t(w)] == ControlKind::Bhp)
      q[w] = system.productivity[w] * (x[system.well_cells[std::size_t(w)]] - u[w]);
    else
      q[w] = u[w];
  }
  return q;
}

}  // namespace picrnn
