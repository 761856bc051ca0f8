#include "picrnn/statespace.hpp"

#include <map>
#include <string>

namespace picrnn {

StateSpaceSystem assemble(const ReservoirModel& model) {
  if (const auto report = validate_model(model); !report.empty())
    throw std::invalid_argument("invalid reservoir model: " + report.front());

  const Grid& g = model.grid;
  const RockFluid& rock = model.rock;
  const Vector& k = rock.permeability;

  StateSpaceSystem sys;
  sys.n = g.size();
  sys.m = Index(model.wells.size());
  sys.accumulation = g.cell_volume() * rock.compressibility * rock.porosity.array();

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(std::size_t(5 * sys.n + sys.m));
  Vector diagonal = Vector::Zero(sys.n);

  auto connect = [&](Index a, Index b, Axis axis) {
    const double tf = face_transmissibility(k[a], k[b], axis, g, rock.viscosity);
    t.emplace_back(a, b, tf);
    t.emplace_back(b, a, tf);
    diagonal[a] -= tf;
    diagonal[b] -= tf;
  };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index c = g.flatten(i, j);
      if (i + 1 < g.nx) connect(c, g.flatten(i + 1, j), Axis::X);
      if (j + 1 < g.ny) connect(c, g.flatten(i, j + 1), Axis::Y);
    }
  }

  std::vector<Eigen::Triplet<double>> b;
  sys.productivity = Vector::Zero(sys.m);
  std::map<Index, std::string> occupied;
  for (Index w = 0; w < sys.m; ++w) {
    const WellSpec& well = model.wells[std::size_t(w)];
    const Index cell = g.flatten(well.i, well.j);
    if (auto [it, fresh] = occupied.emplace(cell, well.name); !fresh)
      throw std::invalid_argument("wells " + it->second + " and " + well.name + " share a cell");
    sys.well_cells.push_back(cell);
    sys.well_kinds.push_back(well.kind);
    if (well.kind == ControlKind::Bhp) {
      const double pi = peaceman_pi(k[cell], g.dx, g.dy, g.dz, rock.viscosity, well.radius, well.skin);
      sys.productivity[w] = pi;
      diagonal[cell] -= pi;
      b.emplace_back(cell, w, pi);
    } else {
      b.emplace_back(cell, w, 1.0);
    }
  }
  for (Index c = 0; c < sys.n; ++c) t.emplace_back(c, c, diagonal[c]);

  sys.transmissibility.resize(sys.n, sys.n);
  sys.transmissibility.setFromTriplets(t.begin(), t.end());
  sys.control.resize(sys.n, sys.m);
  sys.control.setFromTriplets(b.begin(), b.end());
  return sys;
}

Vector row_sums(const StateSpaceSystem& system) {
  Vector s = Vector::Zero(system.n);
  for (std::size_t w = 0; w < system.well_cells.size(); ++w)
    if (system.well_kinds[w] == ControlKind::Bhp) s[system.well_cells[w]] -= system.productivity[Index(w)];
  return s;
}

Vector shifted_controls(const StateSpaceSystem& system, const Vector& u, double c) {
  Vector out = u;
  for (std::size_t w = 0; w < system.well_kinds.size(); ++w)
    if (system.well_kinds[w] == ControlKind::Bhp) out[Index(w)] -= c;
  return out;
}

SparseMatrix implicit_matrix(const StateSpaceSystem& system, double dt) {
  SparseMatrix a = -system.transmissibility;
  for (Index c = 0; c < system.n; ++c) a.coeffRef(c, c) += system.accumulation[c] / dt;
  return a;
}

}  // namespace picrnn
