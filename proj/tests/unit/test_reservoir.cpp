#include "picrnn/reservoir.hpp"
#include "picrnn/units.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace picrnn;
using picrnn::testing::psi;
using picrnn::testing::days;

TEST(Units, PsiToPascal) {
  EXPECT_NEAR(to_si(3000.0, Unit::Psi), 2.0684271e7, 1.0);
  EXPECT_DOUBLE_EQ(to_si(3000.0, Unit::Psi), 3000.0 * 6894.757);
}

TEST(Units, DaysToSeconds) { EXPECT_DOUBLE_EQ(to_si(0.5, Unit::Day), 43200.0); }

TEST(Units, DimensionlessIsIdentity) { EXPECT_DOUBLE_EQ(to_si(1.0, Unit::Dimensionless), 1.0); }

TEST(Units, RoundTripEveryUnit) {
  for (Unit u : {Unit::Meter, Unit::Psi, Unit::Day, Unit::MilliDarcy, Unit::CentiPoise, Unit::PerPsi}) {
    const double x = 123.456;
    EXPECT_NEAR(from_si(to_si(x, u), u), x, 1e-12 * x) << unit_name(u);
  }
}

TEST(Units, CompressibilityIsInverseOfPressure) {
  EXPECT_NEAR(to_si(1e-5, Unit::PerPsi) * to_si(1.0, Unit::Psi), 1e-5, 1e-20);
}

TEST(Units, ParsesTagsAndAliases) {
  EXPECT_EQ(parse_unit("psi"), Unit::Psi);
  EXPECT_EQ(parse_unit("psia"), Unit::Psi);
  EXPECT_EQ(parse_unit("day"), Unit::Day);
  EXPECT_EQ(parse_unit("days"), Unit::Day);
  EXPECT_EQ(parse_unit("mD"), Unit::MilliDarcy);
  EXPECT_EQ(parse_unit("cp"), Unit::CentiPoise);
  EXPECT_EQ(parse_unit("1/psi"), Unit::PerPsi);
  EXPECT_EQ(parse_unit(unit_name(Unit::Meter)), Unit::Meter);
}

TEST(Units, RejectsUnknownTag) { EXPECT_THROW(parse_unit("furlong"), std::invalid_argument); }

TEST(Grid, FlattenIsRowMajorInJ) {
  Grid g{64, 64, 0.625, 0.625, 1.0};
  EXPECT_EQ(g.flatten(10, 10), 650);
  EXPECT_EQ(g.flatten(54, 54), 54 * 64 + 54);
  for (Index c : {Index(0), Index(77), Index(4095)}) {
    auto [i, j] = g.unflatten(c);
    EXPECT_EQ(g.flatten(i, j), c);
  }
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.625 * 0.625);
}

TEST(ValidateModel, ReferenceCaseIsValid) {
  EXPECT_TRUE(validate_model(picrnn::testing::case1_model()).empty());
}

TEST(ValidateModel, ZeroPorosityReported) {
  auto m = picrnn::testing::case1_model();
  m.rock.porosity[5] = 0.0;
  auto report = validate_model(m);
  ASSERT_FALSE(report.empty());
  EXPECT_NE(report.front().find("porosity must be positive"), std::string::npos);
}

TEST(ValidateModel, WellOutsideGridReported) {
  auto m = picrnn::testing::case1_model();
  m.wells.push_back({"X", 70, 10});
  auto report = validate_model(m);
  bool found = false;
  for (const auto& r : report) found |= r.find("well X outside grid") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(ValidateModel, NonPositivePermeabilityAndViscosityReported) {
  auto m = picrnn::testing::case1_model();
  m.rock.permeability[0] = -1.0;
  m.rock.viscosity = 0.0;
  EXPECT_GE(validate_model(m).size(), 2u);
}

TEST(ValidateModel, FieldSizeMismatchReported) {
  auto m = picrnn::testing::case1_model();
  m.rock.porosity.resize(10);
  EXPECT_FALSE(validate_model(m).empty());
}

TEST(LognormalPermeability, DeterministicPositiveAndCentred) {
  Grid g{32, 32, 1.0, 1.0, 1.0};
  const double mean = to_si(50.0, Unit::MilliDarcy);
  Vector a = lognormal_permeability(g, mean, 0.5, 4.0, 7);
  Vector b = lognormal_permeability(g, mean, 0.5, 4.0, 7);
  Vector c = lognormal_permeability(g, mean, 0.5, 4.0, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_GT(a.minCoeff(), 0.0);
  const double log_mean = a.array().log().mean();
  EXPECT_NEAR(log_mean, std::log(mean), 0.5);
}

TEST(ControlSchedule, ConstantCaseOneControls) {
  auto s = ControlSchedule::constant(Vector::Constant(2, psi(1800.0)), days(0.5), 400);
  EXPECT_EQ(s.num_steps(), 400);
  for (int k : {0, 199, 399}) {
    Vector u = s.control_at(k);
    EXPECT_NEAR(u[0], 1.2410563e7, 1.0);
    EXPECT_NEAR(u[1], 1.2410563e7, 1.0);
  }
}

TEST(ControlSchedule, PiecewiseIsLeftClosed) {
  std::vector<ControlSchedule::Segment> segs{{0.0, Vector::Constant(2, psi(2200.0))},
                                             {days(50.0), Vector::Constant(2, psi(1800.0))}};
  auto s = ControlSchedule::piecewise(segs, days(0.5), 400);
  EXPECT_DOUBLE_EQ(s.control_at(99)[0], psi(2200.0));   // day 49.5
  EXPECT_DOUBLE_EQ(s.control_at(100)[0], psi(1800.0));  // day 50.0
  EXPECT_DOUBLE_EQ(s.control_at(399)[1], psi(1800.0));
}

TEST(ControlSchedule, OutOfRangeStepThrows) {
  auto s = ControlSchedule::constant(Vector::Constant(2, 1.0), 1.0, 10);
  EXPECT_THROW(s.control_at(10), std::out_of_range);
  EXPECT_THROW(s.control_at(-1), std::out_of_range);
}

TEST(ControlSchedule, SliceKeepsColumns) {
  Eigen::MatrixXd v(1, 5);
  v << 1, 2, 3, 4, 5;
  ControlSchedule s(v, 2.0);
  auto t = s.slice(1, 3);
  EXPECT_EQ(t.num_steps(), 3);
  EXPECT_DOUBLE_EQ(t.control_at(0)[0], 2.0);
  EXPECT_DOUBLE_EQ(t.control_at(2)[0], 4.0);
  EXPECT_DOUBLE_EQ(t.dt(), 2.0);
}

TEST(ControlSchedule, WarnsWhenBhpExceedsInitialPressure) {
  auto m = picrnn::testing::desk_model();
  auto ok = ControlSchedule::constant(Vector::Constant(2, psi(1800.0)), days(0.5), 4);
  auto high = ControlSchedule::constant(Vector::Constant(2, psi(3500.0)), days(0.5), 4);
  EXPECT_TRUE(schedule_warnings(m, ok).empty());
  EXPECT_FALSE(schedule_warnings(m, high).empty());
}

TEST(Trajectory, InitialStateIsUniform) {
  auto m = picrnn::testing::desk_model();
  Vector x0 = m.initial_state();
  EXPECT_EQ(x0.size(), 256);
  EXPECT_DOUBLE_EQ(x0.minCoeff(), psi(3000.0));
  EXPECT_DOUBLE_EQ(x0.maxCoeff(), psi(3000.0));
}
