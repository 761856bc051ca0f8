#include "picrnn/io/portable_array.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace picrnn::io {

namespace {

constexpr std::string_view kMagic = "PARR1";
constexpr std::string_view kDtype = "f64";

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw std::runtime_error("portable array: truncated buffer");
  char raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace

std::uint64_t PortableArray::count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string encode_array(const PortableArray& array) {
  if (array.count() != array.data.size())
    throw std::invalid_argument("portable array: payload does not match dims");
  std::string out;
  out.reserve(kMagic.size() + kDtype.size() + 4 + 8 * array.dims.size() + 8 * array.data.size());
  out.append(kMagic);
  out.append(kDtype);
  put(out, std::uint32_t(array.dims.size()));
  for (auto d : array.dims) put(out, std::uint64_t(d));
  for (double v : array.data) put(out, v);
  return out;
}

PortableArray decode_array(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw std::runtime_error("portable array: bad magic");
  if (bytes.substr(kMagic.size(), kDtype.size()) != kDtype)
    throw std::runtime_error("portable array: unsupported dtype");
  std::size_t offset = kMagic.size() + kDtype.size();
  PortableArray array;
  const auto rank = take<std::uint32_t>(bytes, offset);
  if (rank > 8) throw std::runtime_error("portable array: rank too large");
  for (std::uint32_t r = 0; r < rank; ++r) array.dims.push_back(take<std::uint64_t>(bytes, offset));
  const std::uint64_t n = array.count();
  if (bytes.size() - offset != 8 * n)
    throw std::runtime_error("portable array: payload length " + std::to_string(bytes.size() - offset) +
                             " does not match dims");
  array.data.resize(n);
  for (auto& v : array.data) v = take<double>(bytes, offset);
  return array;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_array(const std::filesystem::path& path, const PortableArray& array) {
  write_file_atomic(path, encode_array(array));
}

PortableArray read_array(const std::filesystem::path& path) { return decode_array(read_file(path)); }

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory, const Grid& grid) {
  PortableArray array;
  array.dims = {trajectory.states.size(), std::uint64_t(grid.ny), std::uint64_t(grid.nx)};
  array.data.reserve(array.count());
  for (const auto& x : trajectory.states) {
    if (x.size() != grid.size()) throw std::invalid_argument("trajectory snapshot does not match grid");
    array.data.insert(array.data.end(), x.data(), x.data() + x.size());
  }
  write_array(path, array);
  nlohmann::json meta{{"dt_seconds", trajectory.dt},
                      {"provenance", trajectory.provenance == Provenance::Network ? "NN" : "FV"},
                      {"snapshots", trajectory.states.size()},
                      {"nx", grid.nx},
                      {"ny", grid.ny}};
  auto side = path;
  side += ".json";
  write_file_atomic(side, meta.dump(2) + "\n");
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  const PortableArray array = read_array(path);
  if (array.dims.size() != 3) throw std::runtime_error(path.string() + ": trajectory must be rank 3");
  Trajectory t;
  const auto n = Index(array.dims[1] * array.dims[2]);
  for (std::uint64_t s = 0; s < array.dims[0]; ++s)
    t.states.push_back(Eigen::Map<const Vector>(array.data.data() + s * std::uint64_t(n), n));
  auto side = path;
  side += ".json";
  if (std::filesystem::exists(side)) {
    const auto meta = nlohmann::json::parse(read_file(side));
    t.dt = meta.value("dt_seconds", 0.0);
    t.provenance = meta.value("provenance", "FV") == "NN" ? Provenance::Network : Provenance::FiniteVolume;
  }
  return t;
}

std::pair<int, int> trajectory_shape(const std::filesystem::path& path) {
  const PortableArray array = read_array(path);
  if (array.dims.size() != 3) throw std::runtime_error(path.string() + ": trajectory must be rank 3");
  return {int(array.dims[2]), int(array.dims[1])};
}

}  // namespace picrnn::io
