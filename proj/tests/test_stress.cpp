#include <gtest/gtest.h>

#include "iontweez/stress.hpp"
#include "reference.hpp"

using namespace iontweez;
using namespace iontweez::testing;

namespace {

TweezerPattern one_ion_offset(double offset_m, int ion = 3) {
  const UnitSystem u = axial_units();
  PlanePositions off = PlanePositions::Zero(12, 2);
  off(ion, 0) = offset_m;
  off(ion, 1) = 0.5 * offset_m;
  return TweezerPattern::from_si(u, Vec::Constant(12, 0.5e6), off, 1e-6, 1e6, 0.25e-6);
}

const Positions& axial_crystal() {
  static const Positions r =
      solve_pseudo_equilibrium(reference_trap(), axial_units(), 7).static_positions;
  return r;
}

}  // namespace

TEST(Stress, CenteredTweezersDoNotMoveIons) {
  TweezerPattern p = one_ion_offset(0.0);
  const StressedState fo = first_order_stress(axial_crystal(), reference_trap(), axial_units(), p);
  const StressedState ex =
      exact_stressed_equilibrium(axial_crystal(), reference_trap(), axial_units(), p);
  EXPECT_EQ(fo.displacement.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(ex.displacement.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Stress, FirstOrderConvergesQuadratically) {
  double previous = 0.0;
  for (double d : {25e-9, 50e-9, 100e-9}) {
    const TweezerPattern p = one_ion_offset(d);
    const StressedState fo =
        first_order_stress(axial_crystal(), reference_trap(), axial_units(), p);
    const StressedState ex =
        exact_stressed_equilibrium(axial_crystal(), reference_trap(), axial_units(), p);
    const double err = (fo.displacement - ex.displacement).norm();
    EXPECT_LT(err / ex.displacement.norm(), 0.05);
    if (previous > 0.0) EXPECT_NEAR(err / previous, 4.0, 0.4);
    previous = err;
  }
}

TEST(Stress, ExactSolutionZeroesForce) {
  const TweezerPattern p = one_ion_offset(200e-9);
  const StressedState ex =
      exact_stressed_equilibrium(axial_crystal(), reference_trap(), axial_units(), p);
  // Independent force balance: Coulomb + trap + tweezer springs.
  const Vec3 k = trap_curvature(reference_trap(), axial_units());
  const Vec x = flatten<2>(ex.positions);
  Vec g = coulomb_gradient<2>(ex.positions);
  const PlanePositions base = plane_of(axial_crystal());
  for (int i = 0; i < 12; ++i) {
    const double nu2 = p.nu(i) * p.nu(i);
    g(2 * i) += k(kY) * x(2 * i) + nu2 * (x(2 * i) - base(i, 0) - p.offsets(i, 0));
    g(2 * i + 1) += k(kZ) * x(2 * i + 1) + nu2 * (x(2 * i + 1) - base(i, 1) - p.offsets(i, 1));
  }
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Stress, StressedHessianUsesThirdDerivatives) {
  const TweezerPattern p = one_ion_offset(20e-9);
  const StressedState fo = first_order_stress(axial_crystal(), reference_trap(), axial_units(), p);
  const Mat d0 = total_plane_hessian(axial_crystal(), reference_trap(), axial_units(), p);
  // Exact Hessian at the first-order positions differs from the prediction only at O(rho^2).
  Mat direct = coulomb_hessian<2>(fo.positions);
  const Vec3 k = trap_curvature(reference_trap(), axial_units());
  for (int i = 0; i < 12; ++i) {
    direct(2 * i, 2 * i) += k(kY) + p.nu(i) * p.nu(i);
    direct(2 * i + 1, 2 * i + 1) += k(kZ) + p.nu(i) * p.nu(i);
  }
  EXPECT_LT((fo.hessian - direct).norm(), 0.01 * (fo.hessian - d0).norm());
}

TEST(Stress, UniformPinningShiftsPlaneSpectrum) {
  const Mat h = plane_hessian(axial_crystal(), reference_trap(), axial_units());
  const TweezerPattern p = TweezerPattern::centered(Vec::Constant(12, 2.0), 5.0);
  const Mat h2 = total_plane_hessian(axial_crystal(), reference_trap(), axial_units(), p);
  Eigen::SelfAdjointEigenSolver<Mat> a(h), b(h2);
  EXPECT_LT((b.eigenvalues() - a.eigenvalues() - Vec::Constant(24, 4.0)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(Stress, ValidationNamesOffendingIon) {
  PlanePositions off = PlanePositions::Zero(12, 2);
  off(5, 1) = 0.3e-6;
  try {
    TweezerPattern::from_si(axial_units(), Vec::Constant(12, 0.5e6), off);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ion 5"), std::string::npos);
  }
  Vec nu = Vec::Constant(12, 0.5e6);
  nu(9) = 2e6;
  try {
    TweezerPattern::from_si(axial_units(), nu, PlanePositions());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ion 9"), std::string::npos);
  }
}

TEST(Stress, UnitConversionOfPositions) {
  const Positions r = convert_positions(axial_crystal(), axial_units(), rf_units());
  EXPECT_NEAR(rf_units().length_to_si(r(2, kZ)), axial_units().length_to_si(axial_crystal()(2, kZ)),
              1e-18);
}

TEST(Stress, PlaneModesEmbedIntoFullSpace) {
  const Mat h = plane_hessian(axial_crystal(), reference_trap(), axial_units());
  const ModeStructure ms = plane_modes(h);
  EXPECT_EQ(ms.modes.rows(), 36);
  EXPECT_EQ(ms.modes.cols(), 24);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(ms.modes.row(3 * i + kX).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR((ms.modes.transpose() * ms.modes - Mat::Identity(24, 24)).norm(), 0.0, 1e-12);
}
