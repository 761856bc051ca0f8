#include "picrnn/reservoir.hpp"

#include "picrnn/statespace.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace picrnn {

std::vector<std::string> validate_model(const ReservoirModel& model) {
  std::vector<std::string> report;
  const Grid& g = model.grid;
  const RockFluid& r = model.rock;

  if (g.nx < 1 || g.ny < 1) report.emplace_back("grid must have at least one cell per axis");
  if (!(g.dx > 0) || !(g.dy > 0) || !(g.dz > 0))
    report.emplace_back("cell sizes must be positive");
  const Index n = std::max<Index>(g.size(), 0);

  if (r.porosity.size() != n) {
    report.emplace_back("porosity field length must equal nx*ny");
  } else if (!((r.porosity.array() > 0).all())) {
    report.emplace_back("porosity must be positive");
  } else if (!((r.porosity.array() < 1).all())) {
    report.emplace_back("porosity must be below 1");
  }
  if (r.permeability.size() != n) {
    report.emplace_back("permeability field length must equal nx*ny");
  } else if (!((r.permeability.array() > 0).all()) || !r.permeability.allFinite()) {
    report.emplace_back("permeability must be positive");
  }
  if (!(r.viscosity > 0)) report.emplace_back("viscosity must be positive");
  if (!(r.compressibility > 0)) report.emplace_back("compressibility must be positive");
  if (!(r.initial_pressure > 0)) report.emplace_back("initial pressure must be positive");
  if (!(r.density > 0)) report.emplace_back("density must be positive");

  std::set<Index> occupied;
  const double re = (g.dx > 0 && g.dy > 0) ? effective_radius(g.dx, g.dy) : 0.0;
  for (const auto& w : model.wells) {
    if (!g.contains(w.i, w.j)) {
      report.emplace_back("well " + w.name + " outside grid");
      continue;
    }
    if (!occupied.insert(g.flatten(w.i, w.j)).second)
      report.emplace_back("well " + w.name + " shares a cell with another well");
    if (!(w.radius > 0)) {
      report.emplace_back("well " + w.name + " radius must be positive");
    } else if (!(w.radius < re)) {
      report.emplace_back("well " + w.name + " radius must be below the effective block radius");
    }
  }
  return report;
}

ReservoirModel homogeneous_model(const Grid& grid, double porosity,
                                 double permeability, double viscosity,
                                 double compressibility,
                                 double initial_pressure,
                                 std::vector<WellSpec> wells) {
  ReservoirModel model;
  model.grid = grid;
  model.rock.porosity = Vector::Constant(grid.size(), porosity);
  model.rock.permeability = Vector::Constant(grid.size(), permeability);
  model.rock.viscosity = viscosity;
  model.rock.compressibility = compressibility;
  model.rock.initial_pressure = initial_pressure;
  model.wells = std::move(wells);
  return model;
}

Vector lognormal_permeability(const Grid& grid, double mean, double log_std,
                              double correlation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = grid.size();
  Vector white(n);
  for (Index c = 0; c < n; ++c) white[c] = normal(rng);

  // separable Gaussian smoothing, reflecting at the boundary
  const int radius = std::max(0, int(std::ceil(2.0 * correlation)));
  std::vector<double> kernel(2 * radius + 1, 1.0);
  if (correlation > 0) {
    for (int d = -radius; d <= radius; ++d)
      kernel[d + radius] = std::exp(-0.5 * d * d / (correlation * correlation));
  }
  auto reflect = [](int a, int len) {
    while (a < 0 || a >= len) a = a < 0 ? -a - 1 : 2 * len - a - 1;
    return a;
  };
  Vector tmp(n), smooth(n);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      double acc = 0;
      for (int d = -radius; d <= radius; ++d)
        acc += kernel[d + radius] * white[grid.flatten(reflect(i + d, grid.nx), j)];
      tmp[grid.flatten(i, j)] = acc;
    }
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      double acc = 0;
      for (int d = -radius; d <= radius; ++d)
        acc += kernel[d + radius] * tmp[grid.flatten(i, reflect(j + d, grid.ny))];
      smooth[grid.flatten(i, j)] = acc;
    }

  const double mu = smooth.mean();
  const double sd = std::sqrt((smooth.array() - mu).square().mean());
  Vector field(n);
  for (Index c = 0; c < n; ++c) {
    const double z = sd > 0 ? (smooth[c] - mu) / sd : 0.0;
    field[c] = mean * std::exp(log_std * z);
  }
  return field;
}

ControlSchedule::ControlSchedule(Eigen::MatrixXd values, double dt)
    : values_(std::move(values)), dt_(dt) {
  if (!(dt_ > 0)) throw std::invalid_argument("schedule time step must be positive");
  if (!values_.allFinite()) throw std::invalid_argument("schedule controls must be finite");
}

ControlSchedule ControlSchedule::piecewise(const std::vector<Segment>& segments,
                                           double dt, int steps) {
  if (segments.empty()) throw std::invalid_argument("schedule needs at least one segment");
  if (segments.front().start != 0.0)
    throw std::invalid_argument("first schedule segment must start at t = 0");
  if (steps < 0) throw std::invalid_argument("schedule step count must be non-negative");
  const Index m = segments.front().controls.size();
  for (std::size_t s = 1; s < segments.size(); ++s) {
    if (segments[s].controls.size() != m)
      throw std::invalid_argument("schedule segments disagree on well count");
    if (!(segments[s].start > segments[s - 1].start))
      throw std::invalid_argument("schedule segments must be strictly increasing in time");
  }
  Eigen::MatrixXd values(m, steps);
  std::size_t seg = 0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    // tolerate round-off in k * dt when comparing against segment starts
    const double eps = 1e-9 * dt;
    while (seg + 1 < segments.size() && t + eps >= segments[seg + 1].start) ++seg;
    values.col(k) = segments[seg].controls;
  }
  return ControlSchedule(std::move(values), dt);
}

ControlSchedule ControlSchedule::constant(const Vector& controls, double dt, int steps) {
  return ControlSchedule(controls.replicate(1, steps), dt);
}

Vector ControlSchedule::control_at(int k) const {
  if (k < 0 || k >= num_steps()) {
    std::ostringstream msg;
    msg << "control index " << k << " outside schedule of " << num_steps() << " steps";
    throw std::out_of_range(msg.str());
  }
  return values_.col(k);
}

ControlSchedule ControlSchedule::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > num_steps())
    throw std::out_of_range("schedule slice out of range");
  return ControlSchedule(values_.middleCols(first, count), dt_);
}

std::vector<std::string> schedule_warnings(const ReservoirModel& model,
                                           const ControlSchedule& schedule) {
  std::vector<std::string> warnings;
  if (schedule.num_wells() != int(model.wells.size())) {
    warnings.emplace_back("schedule well count does not match model");
    return warnings;
  }
  for (int w = 0; w < schedule.num_wells(); ++w) {
    const auto& well = model.wells[w];
    if (well.kind == ControlKind::Bhp &&
        schedule.values().row(w).maxCoeff() >= model.rock.initial_pressure) {
      warnings.emplace_back("well " + well.name + " BHP is not below initial pressure");
    }
  }
  return warnings;
}

bool Trajectory::finite() const {
  for (const auto& x : states)
    if (!x.allFinite()) return false;
  return true;
}

}  // namespace picrnn
