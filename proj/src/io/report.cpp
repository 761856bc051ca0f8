#include "picrnn/io/report.hpp"

#include "picrnn/units.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace picrnn::io {

ErrorStats summarize(const std::vector<double>& values) {
  ErrorStats s;
  s.cells = values.size();
  if (values.empty()) return s;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.max = sorted.back();
  double total = 0;
  for (double v : sorted) total += v;
  s.mean = total / double(sorted.size());
  const auto rank = std::size_t(std::ceil(0.95 * double(sorted.size())));
  s.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

std::vector<bool> near_well_mask(const Grid& grid, const std::vector<WellSpec>& wells, int radius) {
  std::vector<bool> mask(std::size_t(grid.size()), false);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      for (const auto& w : wells)
        if (std::max(std::abs(i - w.i), std::abs(j - w.j)) <= radius) mask[std::size_t(grid.flatten(i, j))] = true;
  return mask;
}

SnapshotError relative_error_map(const Vector& ref, const Vector& test, const Grid& grid,
                                 const std::vector<WellSpec>& wells, int radius) {
  if (ref.size() != test.size() || ref.size() != grid.size())
    throw std::invalid_argument("relative_error_map: snapshot sizes do not match the grid");
  if (!((ref.array() > 0).all()))
    throw std::invalid_argument("relative_error_map: reference must be strictly positive");
  SnapshotError out;
  out.field = ((test - ref).array().abs() / ref.array()).matrix();
  const auto mask = near_well_mask(grid, wells, radius);
  std::vector<double> all, near, far;
  for (Index c = 0; c < grid.size(); ++c) {
    all.push_back(out.field[c]);
    (mask[std::size_t(c)] ? near : far).push_back(out.field[c]);
  }
  out.all = summarize(all);
  out.near_well = summarize(near);
  out.far_field = summarize(far);
  return out;
}

ErrorReport compare(const Trajectory& ref, const Trajectory& test, const Grid& grid,
                    const std::vector<WellSpec>& wells, std::vector<int> steps) {
  const int common = int(std::min(ref.states.size(), test.states.size()));
  if (steps.empty())
    for (int k = 0; k < common; ++k) steps.push_back(k);
  ErrorReport report;
  for (int k : steps) {
    if (k < 0 || k >= common) throw std::invalid_argument("compare: snapshot " + std::to_string(k) + " out of range");
    report.steps.push_back(k);
    report.snapshots.push_back(
        relative_error_map(ref.states[std::size_t(k)], test.states[std::size_t(k)], grid, wells));
  }
  return report;
}

std::vector<int> report_steps(const std::vector<double>& days, double dt, int last) {
  std::vector<int> steps;
  for (double d : days) {
    const int k = int(std::lround(d * constants::day / dt));
    steps.push_back(std::clamp(k, 0, last));
  }
  return steps;
}

std::string error_csv(const ErrorReport& report, double dt) {
  std::ostringstream out;
  out << std::setprecision(10) << "step,day,region,max,mean,p95,cells\n";
  for (std::size_t s = 0; s < report.steps.size(); ++s) {
    const double day = report.steps[s] * dt / constants::day;
    auto row = [&](const char* region, const ErrorStats& st) {
      out << report.steps[s] << ',' << day << ',' << region << ',' << st.max << ',' << st.mean << ','
          << st.p95 << ',' << st.cells << '\n';
    };
    row("all", report.snapshots[s].all);
    row("near_well", report.snapshots[s].near_well);
    row("far_field", report.snapshots[s].far_field);
  }
  return out.str();
}

std::string well_rate_csv(const std::vector<Vector>& rates, const std::vector<WellSpec>& wells, double dt) {
  std::ostringstream out;
  out << std::setprecision(12) << "step,day,well,rate\n";
  for (std::size_t k = 0; k < rates.size(); ++k)
    for (std::size_t w = 0; w < wells.size(); ++w)
      out << k << ',' << double(k) * dt / constants::day << ',' << wells[w].name << ','
          << rates[k][Index(w)] << '\n';
  return out.str();
}

}  // namespace picrnn::io
