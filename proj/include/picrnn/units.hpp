#pragma once

#include <string>
#include <string_view>

namespace picrnn {

/// Unit tags accepted at I/O boundaries. Everything inside the library is SI.
enum class Unit {
  Dimensionless,
  Meter,
  Psi,
  Day,
  MilliDarcy,
  CentiPoise,
  PerPsi,
  Pascal,
  Second,
  SquareMeter,
  PascalSecond,
  PerPascal,
  KgPerCubicMeter,
  CubicMeterPerSecond,
  CubicMeterPerDay,
};

namespace constants {
inline constexpr double psi = 6894.757;          // Pa
inline constexpr double day = 86400.0;           // s
inline constexpr double millidarcy = 9.869233e-16;  // m^2
inline constexpr double centipoise = 1e-3;       // Pa.s
}  // namespace constants

/// Multiplicative factor taking a value in `unit` to SI.
template <typename Scalar = double>
constexpr Scalar si_factor(Unit unit) {
  switch (unit) {
    case Unit::Psi: return Scalar(constants::psi);
    case Unit::Day: return Scalar(constants::day);
    case Unit::MilliDarcy: return Scalar(constants::millidarcy);
    case Unit::CentiPoise: return Scalar(constants::centipoise);
    case Unit::PerPsi: return Scalar(1) / Scalar(constants::psi);
    case Unit::CubicMeterPerDay: return Scalar(1) / Scalar(constants::day);
    default: return Scalar(1);
  }
}

template <typename Scalar>
constexpr Scalar to_si(Scalar value, Unit unit) {
  return value * si_factor<Scalar>(unit);
}

template <typename Scalar>
constexpr Scalar from_si(Scalar value, Unit unit) {
  return value / si_factor<Scalar>(unit);
}

/// Parses a unit tag such as "psi", "day", "mD". Throws std::invalid_argument.
Unit parse_unit(std::string_view tag);
std::string unit_name(Unit unit);

}  // namespace picrnn
