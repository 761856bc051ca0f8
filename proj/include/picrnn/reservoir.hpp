#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace picrnn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

/// Cartesian single-layer grid. Cell (i, j) is stored at j * nx + i.
struct Grid {
  int nx = 1;
  int ny = 1;
  double dx = 1.0;  // m
  double dy = 1.0;  // m
  double dz = 1.0;  // m

  Index size() const { return Index(nx) * ny; }
  Index flatten(int i, int j) const { return Index(j) * nx + i; }
  std::pair<int, int> unflatten(Index cell) const {
    return {int(cell % nx), int(cell / nx)};
  }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  double cell_volume() const { return dx * dy * dz; }
};

/// Rock and fluid properties, SI units. Porosity and permeability are per cell.
struct RockFluid {
  Vector porosity;
  Vector permeability;            // m^2, isotropic
  double viscosity = 1e-3;        // Pa.s
  double compressibility = 1e-9;  // 1/Pa
  double initial_pressure = 2e7;  // Pa
  double density = 800.0;         // kg/m^3, carried as metadata only
};

enum class ControlKind { Bhp, Rate };

struct WellSpec {
  std::string name;
  int i = 0;
  int j = 0;
  double radius = 0.09;  // m
  double skin = 0.0;
  ControlKind kind = ControlKind::Bhp;
};

struct ReservoirModel {
  Grid grid;
  RockFluid rock;
  std::vector<WellSpec> wells;

  /// Uniform initial pressure field.
  Vector initial_state() const {
    return Vector::Constant(grid.size(), rock.initial_pressure);
  }
};

/// Lists violated invariants; an empty report means the model is usable.
std::vector<std::string> validate_model(const ReservoirModel& model);

/// Builds a homogeneous model. Permeability in m^2.
ReservoirModel homogeneous_model(const Grid& grid, double porosity,
                                 double permeability, double viscosity,
                                 double compressibility,
                                 double initial_pressure,
                                 std::vector<WellSpec> wells);

/// Log-normal permeability field with Gaussian-smoothed log values.
/// `mean` is the geometric mean (m^2), `log_std` the standard deviation
/// of ln K after smoothing, `correlation` the smoothing radius in cells.
Vector lognormal_permeability(const Grid& grid, double mean, double log_std,
                              double correlation, std::uint64_t seed);

/// Per-well controls over a horizon: values(w, k) is the control of well w
/// applied over [k dt, (k+1) dt). BHP in Pa, rates in m^3/s (positive =
/// injection).
class ControlSchedule {
 public:
  ControlSchedule() = default;
  ControlSchedule(Eigen::MatrixXd values, double dt);

  struct Segment {
    double start;    // s, segment applies on [start, next start)
    Vector controls; // one entry per well
  };

  /// Step-function schedule; segments must be sorted and the first must
  /// start at 0.
  static ControlSchedule piecewise(const std::vector<Segment>& segments,
                                   double dt, int steps);
  static ControlSchedule constant(const Vector& controls, double dt, int steps);

  int num_wells() const { return int(values_.rows()); }
  int num_steps() const { return int(values_.cols()); }
  double dt() const { return dt_; }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Control vector applied over step k -> k+1. Throws std::out_of_range.
  Vector control_at(int k) const;

  /// Steps [first, first + count) as a new schedule.
  ControlSchedule slice(int first, int count) const;

 private:
  Eigen::MatrixXd values_;
  double dt_ = 1.0;
};

/// Non-fatal schedule issues, e.g. a producer BHP above initial pressure.
std::vector<std::string> schedule_warnings(const ReservoirModel& model,
                                           const ControlSchedule& schedule);

enum class Provenance { FiniteVolume, Network };

/// Snapshots x_0..x_t of the pressure field (Pa).
struct Trajectory {
  std::vector<Vector> states;
  double dt = 0.0;
  Provenance provenance = Provenance::FiniteVolume;

  int num_steps() const { return int(states.size()) - 1; }
  bool finite() const;
};

}  // namespace picrnn
