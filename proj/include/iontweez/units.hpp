#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "iontweez/errors.hpp"
#include "iontweez/types.hpp"

namespace iontweez {

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace constants

/// Pseudopotential validity regime; outside it a warning is recorded.
inline constexpr double kMaxAbsA = 0.05;
inline constexpr double kMaxQSquared = 0.1;

/// Paul-trap parameterization: per-axis Mathieu parameters and the RF drive.
struct TrapParams {
  Vec3 a = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  double omega_rf = 0.0;  // rad/s
  int n_ions = 1;
  std::vector<std::string> warnings;

  /// Lowest-order squared characteristic exponent a + q^2/2 per axis.
  Vec3 gamma_squared() const { return a + 0.5 * q.cwiseProduct(q); }

  /// Validates and returns a trap; throws on a non-confining axis.
  static TrapParams create(const Vec3& a, const Vec3& q, double omega_rf, int n_ions) {
    if (!(omega_rf > 0.0)) throw ConfigError("trap: omega_rf must be positive");
    if (n_ions < 1) throw ConfigError("trap: n_ions must be at least 1");
    TrapParams trap;
    trap.a = a;
    trap.q = q;
    trap.omega_rf = omega_rf;
    trap.n_ions = n_ions;
    const Vec3 g2 = trap.gamma_squared();
    static constexpr const char* kNames = "xyz";
    for (int axis = 0; axis < 3; ++axis) {
      if (!(g2(axis) > 0.0)) {
        std::ostringstream os;
        os << "trap: axis " << kNames[axis] << " is unconfined (a + q^2/2 = " << g2(axis)
           << ")";
        throw InstabilityError(os.str());
      }
      if (std::abs(a(axis)) >= kMaxAbsA || q(axis) * q(axis) >= kMaxQSquared) {
        std::ostringstream os;
        os << "trap: axis " << kNames[axis] << " outside the pseudopotential regime (a = "
           << a(axis) << ", q = " << q(axis) << ")";
        trap.warnings.push_back(os.str());
      }
    }
    return trap;
  }
};

/// d = (Z^2 e^2 / (4 pi eps0 m w^2))^(1/3).
inline double characteristic_length(double mass_kg, double char_frequency, int charge = 1) {
  if (!(mass_kg > 0.0) || !(char_frequency > 0.0)) {
    throw ConfigError("characteristic_length: mass and frequency must be positive");
  }
  const double ze = charge * constants::elementary_charge;
  const double k = ze * ze / (4.0 * std::numbers::pi * constants::vacuum_permittivity);
  return std::cbrt(k / (mass_kg * char_frequency * char_frequency));
}

/// Dimensionless unit system: lengths in d, times in 1/w, frequencies in w.
class UnitSystem {
 public:
  /// Unset system; use create().
  UnitSystem() = default;

  static UnitSystem create(double mass_kg, double char_frequency, int charge = 1) {
    if (charge == 0) throw ConfigError("unit system: charge must be nonzero");
    UnitSystem u;
    u.mass_ = mass_kg;
    u.charge_ = charge;
    u.char_frequency_ = char_frequency;
    u.length_ = characteristic_length(mass_kg, char_frequency, charge);
    u.energy_ = mass_kg * char_frequency * char_frequency * u.length_ * u.length_;
    return u;
  }

  double mass() const { return mass_; }
  int charge() const { return charge_; }
  double char_frequency() const { return char_frequency_; }
  double length() const { return length_; }
  double energy_scale() const { return energy_; }

  double length_to_si(double x) const { return x * length_; }
  double length_from_si(double meters) const { return meters / length_; }
  double frequency_to_si(double w) const { return w * char_frequency_; }
  double frequency_from_si(double rad_per_s) const { return rad_per_s / char_frequency_; }
  double time_to_si(double t) const { return t / char_frequency_; }
  double time_from_si(double seconds) const { return seconds * char_frequency_; }

  bool operator==(const UnitSystem& other) const = default;

 private:
  double mass_ = 0.0;
  int charge_ = 1;
  double char_frequency_ = 0.0;
  double length_ = 0.0;
  double energy_ = 0.0;
};

/// Pseudopotential secular frequencies Theta = (Omega_rf / 2) sqrt(a + q^2/2), rad/s.
inline Vec3 pseudo_frequencies(const TrapParams& trap) {
  const Vec3 g2 = trap.gamma_squared();
  if ((g2.array() <= 0.0).any()) {
    throw InstabilityError("pseudo_frequencies: unconfined axis");
  }
  return 0.5 * trap.omega_rf * g2.cwiseSqrt();
}

/// Static trap curvature (Theta_alpha / w)^2 in the given units.
inline Vec3 trap_curvature(const TrapParams& trap, const UnitSystem& units) {
  const Vec3 theta = pseudo_frequencies(trap) / units.char_frequency();
  return theta.cwiseProduct(theta);
}

/// True when the units use the rescaled RF time, w = Omega_rf / 2 (drive period pi).
inline bool is_rf_time_units(const TrapParams& trap, const UnitSystem& units) {
  return std::abs(units.char_frequency() / (0.5 * trap.omega_rf) - 1.0) < 1e-12;
}

inline void require_rf_time_units(const TrapParams& trap, const UnitSystem& units,
                                  const char* who) {
  if (!is_rf_time_units(trap, units)) {
    throw ConfigError(std::string(who) + ": requires characteristic frequency Omega_rf / 2");
  }
}

}  // namespace iontweez
