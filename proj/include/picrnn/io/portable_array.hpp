#pragma once

#include "picrnn/reservoir.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace picrnn::io {

/// Row-major float64 array. On disk: "PARR1", "f64", uint32 rank,
/// rank x uint64 dims, then the payload; all integers and floats
/// little-endian.
struct PortableArray {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t count() const;
  bool operator==(const PortableArray&) const = default;
};

std::string encode_array(const PortableArray& array);
/// Throws std::runtime_error on a malformed buffer.
PortableArray decode_array(std::string_view bytes);

void write_array(const std::filesystem::path& path, const PortableArray& array);
PortableArray read_array(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Trajectory as a [snapshots, ny, nx] array plus a JSON sidecar
/// (<path>.json) holding dt and provenance.
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory, const Grid& grid);
Trajectory read_trajectory(const std::filesystem::path& path);
/// Grid shape (nx, ny) stored in a trajectory file.
std::pair<int, int> trajectory_shape(const std::filesystem::path& path);

}  // namespace picrnn::io
