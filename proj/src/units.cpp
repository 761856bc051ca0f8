#include "picrnn/units.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace picrnn {

namespace {

constexpr std::array<std::pair<std::string_view, Unit>, 15> kUnitTags{{
    {"dimensionless", Unit::Dimensionless},
    {"m", Unit::Meter},
    {"psi", Unit::Psi},
    {"day", Unit::Day},
    {"mD", Unit::MilliDarcy},
    {"cp", Unit::CentiPoise},
    {"1/psi", Unit::PerPsi},
    {"Pa", Unit::Pascal},
    {"s", Unit::Second},
    {"m2", Unit::SquareMeter},
    {"Pa.s", Unit::PascalSecond},
    {"1/Pa", Unit::PerPascal},
    {"kg/m3", Unit::KgPerCubicMeter},
    {"m3/s", Unit::CubicMeterPerSecond},
    {"m3/day", Unit::CubicMeterPerDay},
}};

}  // namespace

Unit parse_unit(std::string_view tag) {
  // common aliases
  if (tag == "psia") tag = "psi";
  if (tag == "days") tag = "day";
  if (tag == "1/psia") tag = "1/psi";
  for (const auto& [name, unit] : kUnitTags) {
    if (name == tag) return unit;
  }
  throw std::invalid_argument("unknown unit tag '" + std::string(tag) + "'");
}

std::string unit_name(Unit unit) {
  for (const auto& [name, u] : kUnitTags) {
    if (u == unit) return std::string(name);
  }
  return "?";
}

}  // namespace picrnn
