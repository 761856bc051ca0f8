#pragma once

#include "picrnn/reservoir.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace picrnn::io {

struct ErrorStats {
  double max = 0.0;
  double mean = 0.0;
  double p95 = 0.0;  // nearest-rank percentile
  std::size_t cells = 0;
};

ErrorStats summarize(const std::vector<double>& values);

/// Relative error |test - ref| / ref of one snapshot, with statistics over
/// all cells and over the near-well / far-field partition.
struct SnapshotError {
  Vector field;
  ErrorStats all;
  ErrorStats near_well;
  ErrorStats far_field;
};

/// Cells within Chebyshev distance `radius` of any well.
std::vector<bool> near_well_mask(const Grid& grid, const std::vector<WellSpec>& wells, int radius = 3);

/// Throws std::invalid_argument for mismatched sizes or a non-positive ref.
SnapshotError relative_error_map(const Vector& ref, const Vector& test, const Grid& grid,
                                 const std::vector<WellSpec>& wells, int radius = 3);

struct ErrorReport {
  std::vector<int> steps;
  std::vector<SnapshotError> snapshots;
};

/// Errors at the given snapshot indices (all common snapshots if empty).
ErrorReport compare(const Trajectory& ref, const Trajectory& test, const Grid& grid,
                    const std::vector<WellSpec>& wells, std::vector<int> steps = {});

/// Snapshot indices for report times in days, clamped to [0, last].
std::vector<int> report_steps(const std::vector<double>& days, double dt, int last);

/// step,day,region,max,mean,p95,cells
std::string error_csv(const ErrorReport& report, double dt);
/// step,day,well,rate
std::string well_rate_csv(const std::vector<Vector>& rates, const std::vector<WellSpec>& wells, double dt);

}  // namespace picrnn::io
