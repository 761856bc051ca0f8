#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace picrnn::io {

struct HeatmapBounds {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;
};

/// 8-bit binary PGM (P5), min-max scaled; row 0 of the image is grid row
/// j = 0. A constant field renders as uniform 128.
std::string encode_pgm(std::span<const double> field, int width, int height, HeatmapBounds* bounds = nullptr);

/// Writes the PGM and a <path>.json sidecar with the scaling bounds.
HeatmapBounds write_heatmap(const std::filesystem::path& path, std::span<const double> field, int width,
                            int height);

}  // namespace picrnn::io
