#include <gtest/gtest.h>

#include "iontweez/config.hpp"

using namespace iontweez;

namespace {

const char* kMinimal = R"(
[trap]
a = 0.018704, -0.018900, 0.000196
q = 0.202780, -0.202780, 0
omega_rf_hz = 20e6
n_ions = 12
ion_mass_amu = 170.936
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

void expect_error_containing(const std::string& text, const std::string& fragment) {
  try {
    parse_config_text(text);
    FAIL() << "expected ConfigError containing " << fragment;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Config, MinimalTrapFillsDefaults) {
  const Config c = parse_config_text(kMinimal);
  EXPECT_EQ(c.trap.n_ions, 12);
  EXPECT_EQ(c.tweezers.nu_hz.size(), 12u);
  EXPECT_EQ(c.tweezers.offsets_um.size(), 24u);
  EXPECT_EQ(c.optimize.budget, 30000);
  EXPECT_EQ(c.optimize.restarts, 4);
  EXPECT_EQ(c.noise.repeat, 10000);
  EXPECT_EQ(c.resolved.at("optimize.budget"), "30000");
  EXPECT_EQ(c.resolved.at("drive.k"), "0,1,0");
}

TEST(Config, ReferenceFileGivesExactTrap) {
  const Config c = parse_config(std::string(IONTWEEZ_CONFIG_DIR) + "/reference.ini");
  const TrapParams t = trap_from(c);
  EXPECT_EQ(t.a, Vec3(0.018704, -0.018900, 0.000196));
  EXPECT_EQ(t.q, Vec3(0.202780, -0.202780, 0.0));
  EXPECT_EQ(t.omega_rf, constants::two_pi * 20e6);
  EXPECT_EQ(t.n_ions, 12);
  EXPECT_EQ(c.trap.ion_mass_amu, 170.936);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"reference.ini", "smoke.ini", "single_ion.ini", "two_ion_chain.ini"}) {
    EXPECT_NO_THROW(parse_config(std::string(IONTWEEZ_CONFIG_DIR) + "/" + name)) << name;
  }
}

TEST(Config, UnknownKeyIsNamed) {
  expect_error_containing(with("[drive]\nwavelenght_nm = 411\n"), "drive.wavelenght_nm");
  expect_error_containing(with("[bogus]\nx = 1\n"), "[bogus]");
}

TEST(Config, FrequencyAboveBoundNamesIon) {
  std::string nu = "0";
  for (int i = 1; i < 12; ++i) nu += i == 7 ? ", 2e6" : ", 1e5";
  expect_error_containing(with("[tweezers]\nnu_hz = " + nu + "\n"), "ion 7");
}

TEST(Config, OffsetAboveBoundNamesIon) {
  std::string off;
  for (int k = 0; k < 24; ++k) off += (k ? ", " : "") + std::string(k == 9 ? "0.3" : "0");
  expect_error_containing(with("[tweezers]\noffsets_um = " + off + "\n"), "ion 4");
}

TEST(Config, RejectsUnitViolations) {
  expect_error_containing(with("[drive]\nmu_hz = -5\n"), "drive.mu_hz");
  expect_error_containing(with("[optimize]\nmu_min_hz = 1e6\nmu_max_hz = 0.5e6\n"), "mu_max_hz");
  expect_error_containing(with("[optimize]\nbudget = 2.5\n"), "integer");
  expect_error_containing(with("[noise]\nmode = pink\n"), "noise.mode");
}

TEST(Config, MissingRequiredKey) {
  expect_error_containing("[trap]\nn_ions = 2\n", "trap.a");
  expect_error_containing("[ions]\nseed = 1\n", "[trap]");
}

TEST(Config, ConversionsToProblemUnits) {
  const Config c = parse_config_text(with("[tweezers]\nnu_hz = 0.5e6\n"));
  const UnitSystem u = UnitSystem::create(ion_mass_kg(c), 0.5 * trap_from(c).omega_rf);
  const TweezerPattern p = pattern_from(c, u);
  EXPECT_NEAR(p.nu(3), 0.05, 1e-15);
  const Bounds b = bounds_from(c, u);
  EXPECT_NEAR(b.nu_max, 0.1, 1e-15);
  EXPECT_EQ(schedule_from(c).budget, 30000);
}
