#include "picrnn/statespace.hpp"
#include "support/oracles.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace picrnn;
using picrnn::testing::psi;

namespace {

const double kPerm = to_si(50.0, Unit::MilliDarcy);
const double kMu = to_si(1.13, Unit::CentiPoise);
const double kCt = to_si(1e-5, Unit::PerPsi);

ReservoirModel single_cell(ControlKind kind = ControlKind::Bhp) {
  auto m = homogeneous_model(Grid{1, 1, 0.625, 0.625, 1.0}, 0.2, kPerm, kMu, kCt, psi(3000.0), {{"W", 0, 0}});
  m.wells[0].kind = kind;
  return m;
}

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

}  // namespace

TEST(Peaceman, EffectiveRadius) {
  EXPECT_NEAR(effective_radius(0.625, 0.625), 0.1237437, 1e-7);
  EXPECT_DOUBLE_EQ(effective_radius(0.625, 0.625), 0.14 * std::sqrt(2.0 * 0.625 * 0.625));
}

TEST(Peaceman, ReferenceProductivityIndex) {
  const double pi = peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.09, 0.0);
  const double hand = 2.0 * std::numbers::pi * 4.9346165e-14 / (1.13e-3 * std::log(0.12374368670764582 / 0.09));
  EXPECT_NEAR(pi, 8.617e-10, 1e-13);
  EXPECT_NEAR(pi / hand, 1.0, 1e-7);
}

TEST(Peaceman, LinearInThickness) {
  const double a = peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.09, 0.0);
  const double b = peaceman_pi(kPerm, 0.625, 0.625, 2.0, kMu, 0.09, 0.0);
  EXPECT_DOUBLE_EQ(b, 2.0 * a);
}

TEST(Peaceman, SkinAddsToLogTerm) {
  const double s0 = peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.09, 0.0);
  const double s1 = peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.09, 1.0);
  const double log_term = std::log(effective_radius(0.625, 0.625) / 0.09);
  EXPECT_NEAR(s1 / s0, log_term / (log_term + 1.0), 1e-14);
}

TEST(Peaceman, DegenerateWellRejected) {
  // r_w larger than r_e makes the log term negative.
  EXPECT_THROW(peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.5, 0.0), std::domain_error);
  EXPECT_THROW(peaceman_pi(0.0, 0.625, 0.625, 1.0, kMu, 0.09, 0.0), std::domain_error);
}

TEST(Transmissibility, ReferenceFaceValue) {
  Grid g{64, 64, 0.625, 0.625, 1.0};
  const double t = face_transmissibility(kPerm, kPerm, Axis::X, g, kMu);
  EXPECT_NEAR(t, 4.367e-11, 1e-14);
  EXPECT_NEAR(t, kPerm / kMu, 1e-25);  // area / distance = dz here
}

TEST(Transmissibility, HarmonicMeanProperties) {
  EXPECT_DOUBLE_EQ(harmonic_mean(3.0, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(1.0, 0.0), 0.0);
  EXPECT_LT(harmonic_mean(1.0, 1e-12), 3e-12);
  EXPECT_DOUBLE_EQ(harmonic_mean(2.0, 6.0), 3.0);
}

TEST(Assemble, SingleCellBhpWell) {
  auto m = single_cell();
  auto s = assemble(m);
  const double pi = peaceman_pi(kPerm, 0.625, 0.625, 1.0, kMu, 0.09, 0.0);
  EXPECT_EQ(s.n, 1);
  EXPECT_EQ(s.m, 1);
  EXPECT_DOUBLE_EQ(dense(s.transmissibility)(0, 0), -pi);
  EXPECT_DOUBLE_EQ(dense(s.control)(0, 0), pi);
  EXPECT_DOUBLE_EQ(s.accumulation[0], 0.625 * 0.625 * 1.0 * 0.2 * kCt);
}

TEST(Assemble, SingleCellRateWell) {
  auto s = assemble(single_cell(ControlKind::Rate));
  EXPECT_DOUBLE_EQ(dense(s.transmissibility)(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(dense(s.control)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.productivity[0], 0.0);
}

TEST(Assemble, TwoCellsNoWells) {
  auto m = homogeneous_model(Grid{2, 1, 0.625, 0.625, 1.0}, 0.2, kPerm, kMu, kCt, psi(3000.0), {});
  auto s = assemble(m);
  const double tf = face_transmissibility(kPerm, kPerm, Axis::X, m.grid, kMu);
  Eigen::Matrix2d expected;
  expected << -tf, tf, tf, -tf;
  EXPECT_TRUE(dense(s.transmissibility).isApprox(expected, 1e-15));
  EXPECT_EQ(s.m, 0);
}

TEST(Assemble, CaseOneStructure) {
  auto s = assemble(picrnn::testing::case1_model());
  EXPECT_EQ(s.n, 4096);
  EXPECT_EQ(s.m, 2);
  std::vector<std::pair<Index, Index>> nz;
  for (Index r = 0; r < s.control.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(s.control, r); it; ++it) nz.emplace_back(it.row(), it.col());
  ASSERT_EQ(nz.size(), 2u);
  EXPECT_EQ(nz[0], (std::pair<Index, Index>{10 * 64 + 10, 0}));
  EXPECT_EQ(nz[1], (std::pair<Index, Index>{54 * 64 + 54, 1}));
  // 5-point stencil: 4096 diagonals plus 2 * (2 * 64 * 63) off-diagonals.
  EXPECT_EQ(s.transmissibility.nonZeros(), 4096 + 4 * 64 * 63);
}

TEST(Assemble, SymmetricAndConservative) {
  Grid g{12, 9, 1.0, 2.0, 1.5};
  auto m = homogeneous_model(g, 0.2, kPerm, kMu, kCt, psi(3000.0), {{"A", 3, 4}});
  m.rock.permeability = lognormal_permeability(g, kPerm, 1.0, 3.0, 11);
  auto s = assemble(m);
  Eigen::MatrixXd t = dense(s.transmissibility);
  EXPECT_EQ((t - t.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const double scale = t.cwiseAbs().maxCoeff();
  const Index well = g.flatten(3, 4);
  for (Index r = 0; r < s.n; ++r) {
    if (r == well) {
      EXPECT_NEAR(t.row(r).sum(), -s.productivity[0], 1e-12 * scale);
    } else {
      EXPECT_NEAR(t.row(r).sum(), 0.0, 1e-12 * scale);
    }
  }
}

TEST(Transmissibility, VanishesTowardImpermeableNeighbour) {
  Grid g{3, 1, 1.0, 1.0, 1.0};
  EXPECT_EQ(face_transmissibility(kPerm, 0.0, Axis::X, g, kMu), 0.0);
  EXPECT_LT(face_transmissibility(kPerm, 1e-30, Axis::Y, g, kMu), 1e-26);
  EXPECT_THROW(face_transmissibility(-1.0, kPerm, Axis::X, g, kMu), std::domain_error);
}

TEST(Assemble, RowSumsAreWellSinks) {
  auto m = picrnn::testing::desk_model();
  auto s = assemble(m);
  Vector numeric = s.transmissibility * Vector::Ones(s.n);
  Vector exact = row_sums(s);
  EXPECT_LT((numeric - exact).cwiseAbs().maxCoeff(), 1e-12 * s.productivity.maxCoeff());
  EXPECT_EQ(exact[m.grid.flatten(2, 2)], -s.productivity[0]);
  EXPECT_EQ(exact[0], 0.0);
}

TEST(Assemble, RejectsInvalidModels) {
  auto m = picrnn::testing::desk_model();
  m.wells.push_back({"dup", 2, 2});
  EXPECT_THROW(assemble(m), std::invalid_argument);
  auto bad = picrnn::testing::desk_model();
  bad.rock.porosity[0] = 0.0;
  EXPECT_THROW(assemble(bad), std::invalid_argument);
}

TEST(Residual, UniformStateWithoutWellsIsExactlyZero) {
  Grid g{8, 8, 1.0, 1.0, 1.0};
  auto m = homogeneous_model(g, 0.2, kPerm, kMu, kCt, psi(3000.0), {});
  m.rock.permeability = lognormal_permeability(g, kPerm, 1.0, 2.0, 4);
  auto s = assemble(m);
  Vector x = m.initial_state();
  Vector r = residual(s, x, x, Vector(0), 43200.0);
  EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Residual, SingleCellFrozenState) {
  auto s = assemble(single_cell());
  const double p0 = psi(3000.0), pwf = psi(1800.0);
  Vector x = Vector::Constant(1, p0);
  Vector r = residual(s, x, x, Vector::Constant(1, pwf), 43200.0);
  EXPECT_NEAR(r[0], s.productivity[0] * (pwf - p0), 1e-18);
  EXPECT_LT(r[0], 0.0);
}

TEST(Residual, DimensionMismatchRejected) {
  auto s = assemble(single_cell());
  EXPECT_THROW(residual(s, Vector::Zero(2), Vector::Zero(1), Vector::Zero(1), 1.0), std::invalid_argument);
  EXPECT_THROW(residual(s, Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 0.0), std::invalid_argument);
}

TEST(ImplicitMatrix, SpdOnRandomField) {
  Grid g{8, 8, 1.0, 1.0, 1.0};
  auto m = homogeneous_model(g, 0.2, kPerm, kMu, kCt, psi(3000.0), {{"A", 1, 1}, {"B", 6, 5}});
  m.rock.permeability = lognormal_permeability(g, kPerm, 1.0, 2.0, 3);
  Eigen::MatrixXd a = dense(implicit_matrix(assemble(m), 43200.0));
  EXPECT_EQ((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}
