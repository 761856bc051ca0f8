#include "picrnn/io/heatmap.hpp"

#include "picrnn/io/portable_array.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace picrnn::io {

std::string encode_pgm(std::span<const double> field, int width, int height, HeatmapBounds* bounds) {
  if (width < 1 || height < 1 || field.size() != std::size_t(width) * std::size_t(height))
    throw std::invalid_argument("heatmap: field size does not match dimensions");
  for (double v : field)
    if (!std::isfinite(v)) throw std::invalid_argument("heatmap: field must be finite");
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  HeatmapBounds b{*lo, *hi, !(*hi > *lo)};

  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + field.size());
  for (double v : field) {
    const long level = b.constant ? 128 : std::lround(255.0 * (v - b.min) / (b.max - b.min));
    out.push_back(char(static_cast<unsigned char>(std::clamp(level, 0L, 255L))));
  }
  if (bounds) *bounds = b;
  return out;
}

HeatmapBounds write_heatmap(const std::filesystem::path& path, std::span<const double> field, int width,
                            int height) {
  HeatmapBounds b;
  write_file_atomic(path, encode_pgm(field, width, height, &b));
  nlohmann::json side{{"min", b.min}, {"max", b.max}, {"constant", b.constant}, {"width", width}, {"height", height}};
  if (b.constant) side["note"] = "constant field rendered as uniform mid-gray";
  auto sidecar = path;
  sidecar += ".json";
  write_file_atomic(sidecar, side.dump(2) + "\n");
  return b;
}

}  // namespace picrnn::io
