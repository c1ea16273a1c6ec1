#include <gtest/gtest.h>

#include "iontweez/units.hpp"
#include "reference.hpp"

using namespace iontweez;
using namespace iontweez::testing;

// Frozen with 30-digit arithmetic from CODATA 2018 constants.
constexpr double kLengthYb171At10MHz = 5.90481924070823e-7;

TEST(Units, CharacteristicLengthYb171) {
  const double d = characteristic_length(yb171_mass(), constants::two_pi * 10e6);
  EXPECT_NEAR(d / kLengthYb171At10MHz, 1.0, 1e-12);
}

TEST(Units, ReferenceTrapPseudoFrequencies) {
  const Vec3 theta = pseudo_frequencies(reference_trap()) / constants::two_pi;
  EXPECT_NEAR(theta(kX), 1.98151114556542e6, 1e-3);
  EXPECT_NEAR(theta(kY), 0.407414310008866e6, 1e-3);
  EXPECT_NEAR(theta(kZ), 0.14e6, 1e-3);
  const Vec3 quoted(2.0e6, 0.4e6, 0.14e6);
  for (int axis = 0; axis < 3; ++axis) {
    EXPECT_LT(std::abs(theta(axis) - quoted(axis)) / quoted(axis), 0.02);
  }
}

TEST(Units, RoundTrips) {
  const UnitSystem u = rf_units();
  EXPECT_DOUBLE_EQ(u.length_from_si(u.length_to_si(0.37)), 0.37);
  EXPECT_DOUBLE_EQ(u.frequency_from_si(u.frequency_to_si(0.05)), 0.05);
  EXPECT_DOUBLE_EQ(u.time_from_si(u.time_to_si(2.5)), 2.5);
  EXPECT_TRUE(is_rf_time_units(reference_trap(), u));
  EXPECT_FALSE(is_rf_time_units(reference_trap(), axial_units()));
}

TEST(Units, CurvatureIsPseudoFrequencySquared) {
  const Vec3 k = trap_curvature(reference_trap(), rf_units());
  const Vec3 g2 = reference_trap().gamma_squared();
  for (int axis = 0; axis < 3; ++axis) EXPECT_NEAR(k(axis), g2(axis), 1e-15);
}

TEST(Units, RejectsUnconfinedAxis) {
  EXPECT_THROW(TrapParams::create({0.01, -0.03, 0.0}, {0.1, -0.1, 0.0}, 1e8, 2),
               InstabilityError);
  EXPECT_THROW(TrapParams::create({0.01, 0.01, 0.01}, {0.1, -0.1, 0.0}, -1.0, 2), ConfigError);
  EXPECT_THROW(TrapParams::create({0.01, 0.01, 0.01}, {0.1, -0.1, 0.0}, 1e8, 0), ConfigError);
}

TEST(Units, WarnsOutsidePseudopotentialRegime) {
  const TrapParams t = TrapParams::create({0.0, 0.0, 0.01}, {0.5, -0.5, 0.0}, 1e8, 1);
  EXPECT_FALSE(t.warnings.empty());
  EXPECT_TRUE(reference_trap().warnings.empty());
}
