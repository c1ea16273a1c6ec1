#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "iontweez/config.hpp"
#include "iontweez/coupling.hpp"
#include "iontweez/equilibrium.hpp"
#include "iontweez/io.hpp"
#include "iontweez/modes.hpp"
#include "iontweez/noise.hpp"
#include "iontweez/optimize.hpp"
#include "iontweez/stress.hpp"

namespace iontweez {

/// Trap, units and crystals for one configuration. Everything is in RF time
/// units (characteristic frequency Omega_rf / 2). The RF crystal is solved on
/// first use because it costs seconds.
class Scenario {
 public:
  explicit Scenario(Config config, std::optional<std::uint64_t> seed = std::nullopt)
      : config_(std::move(config)) {
    if (seed) config_.ions.seed = *seed;
    trap_ = trap_from(config_);
    units_ = UnitSystem::create(ion_mass_kg(config_), 0.5 * trap_.omega_rf, config_.trap.charge);
    const Positions guess =
        lattice_guess(trap_, units_, config_.ions.seed, config_.ions.jitter);
    pseudo_ = solve_pseudo_equilibrium(trap_, units_, guess, equilibrium_options_from(config_),
                                       config_.ions.seed);
  }

  const Config& config() const { return config_; }
  const TrapParams& trap() const { return trap_; }
  const UnitSystem& units() const { return units_; }
  int n_ions() const { return trap_.n_ions; }
  const IonCrystal& pseudo() const { return pseudo_; }

  const IonCrystal& rf() const {
    if (!rf_) {
      rf_ = solve_rf_equilibrium(trap_, units_, pseudo_, cooling_from(config_),
                                 equilibrium_options_from(config_));
    }
    return *rf_;
  }

  /// The crystal matching a backend: static for pseudopotential, RF otherwise.
  const IonCrystal& crystal(Backend backend) const {
    return backend == Backend::floquet ? rf() : pseudo_;
  }

  const Positions& reference(Backend backend) const {
    return backend == Backend::floquet ? rf().period_average : pseudo_.static_positions;
  }

  CouplingMatrix target(Backend backend) const { return target_for(reference(backend)); }

  CouplingMatrix target_for(const Positions& reference) const {
    const auto& t = config_.target;
    if (t.kind == "power_law") return target_power_law(reference, t.xi);
    if (t.kind == "file") {
      const CsvData data = read_csv(t.path);
      const int n = n_ions();
      CouplingMatrix m;
      m.j = Mat::Zero(n, n);
      m.relative = true;
      const int ci = data.column("i"), cj = data.column("j"), cv = data.column("J");
      for (const auto& row : data.rows) {
        const int i = static_cast<int>(row[ci]);
        const int j = static_cast<int>(row[cj]);
        if (i < 0 || j < 0 || i >= n || j >= n) throw ConfigError("target: index out of range");
        m.j(i, j) = row[cv];
      }
      if (!m.j.isApprox(m.j.transpose())) throw ConfigError("target: matrix must be symmetric");
      m.j.diagonal().setZero();
      return m;
    }
    return target_spin_ladder(reference, t.j1, t.j2);
  }

  RamanDrive drive(double mu) const {
    return RamanDrive::from_wavelength(config_.drive.k.normalized(),
                                       config_.drive.wavelength_nm * 1e-9, units_, mu);
  }

  /// mu from the config, or the middle of the search range when unset.
  double configured_mu() const {
    const double hz = config_.drive.mu_hz > 0.0
                          ? config_.drive.mu_hz
                          : 0.5 * (config_.optimize.mu_min_hz + config_.optimize.mu_max_hz);
    return units_.frequency_from_si(constants::two_pi * hz);
  }

  Bounds bounds() const { return bounds_from(config_, units_); }
  TweezerPattern pattern() const { return pattern_from(config_, units_); }

  FloquetOptions floquet_options() const {
    FloquetOptions o;
    o.steps_per_period = config_.optimize.floquet_steps;
    return o;
  }

  OptimizationProblem problem(Backend backend, bool doppler) const {
    OptimizationProblem p;
    p.backend = backend;
    p.doppler = doppler;
    p.trap = trap_;
    p.bounds = bounds();
    p.drive = drive(p.bounds.mu_min);
    p.penalty = config_.optimize.penalty;
    p.rescale = config_.optimize.rescale;
    p.floquet = floquet_options();
    p.reference = reference(backend);
    p.target = target_for(p.reference);
    p.hessians = backend == Backend::floquet ? hessian_set(rf(), trap_)
                                             : static_hessians(pseudo_, trap_);
    if (config_.optimize.symmetry) p.symmetry = mirror_pairing(p.reference);
    return p;
  }

  OffsetProblem offset_problem(const Vec& nu, double mu) const {
    OffsetProblem op;
    op.positions = pseudo_.static_positions;
    op.trap = trap_;
    op.units = units_;
    const Bounds b = bounds();
    op.pattern = TweezerPattern::centered(nu, b.nu_max, b.offset_max);
    op.mu = mu;
    op.drive = drive(mu);
    op.target = target_for(op.positions);
    op.gap = b.gap;
    op.penalty = config_.optimize.penalty;
    op.rescale = config_.optimize.rescale;
    op.mode = config_.optimize.offset_mode == "two_step" ? OffsetMode::two_step
                                                          : OffsetMode::exact;
    op.threshold = config_.optimize.threshold;
    return op;
  }

  AnnealSchedule schedule() const { return schedule_from(config_); }

  NoiseMode noise_mode() const {
    return config_.noise.mode == "direct" ? NoiseMode::direct : NoiseMode::power;
  }

 private:
  Config config_;
  TrapParams trap_;
  UnitSystem units_;
  IonCrystal pseudo_;
  mutable std::optional<IonCrystal> rf_;
};

/// Angular frequency (dimensionless) to Hz.
inline double to_hz(const UnitSystem& units, double w) {
  return units.frequency_to_si(w) / constants::two_pi;
}

/// Pattern file written by the optimizer: one row per ion.
inline CsvTable pattern_table(const UnitSystem& units, const Vec& nu, double mu,
                              const Positions& offsets = {}) {
  CsvTable t({"ion", "nu_hz", "offset_y_m", "offset_z_m", "mu_hz"}, {"1", "Hz", "m", "m", "Hz"});
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double oy = offsets.rows() ? units.length_to_si(offsets(i, kY)) : 0.0;
    const double oz = offsets.rows() ? units.length_to_si(offsets(i, kZ)) : 0.0;
    t.add_row({static_cast<double>(i), to_hz(units, nu(i)), oy, oz, to_hz(units, mu)});
  }
  return t;
}

struct PatternFile {
  Vec nu;  // dimensionless
  double mu = 0.0;
};

inline PatternFile read_pattern(const std::string& path, const UnitSystem& units, int n_ions) {
  const CsvData data = read_csv(path);
  if (static_cast<int>(data.rows.size()) != n_ions) {
    throw ConfigError("pattern: expected one row per ion in " + path);
  }
  const int ci = data.column("ion"), cn = data.column("nu_hz"), cm = data.column("mu_hz");
  PatternFile p;
  p.nu = Vec::Zero(n_ions);
  for (const auto& row : data.rows) {
    const int i = static_cast<int>(row[ci]);
    if (i < 0 || i >= n_ions) throw ConfigError("pattern: ion index out of range");
    p.nu(i) = units.frequency_from_si(constants::two_pi * row[cn]);
    p.mu = units.frequency_from_si(constants::two_pi * row[cm]);
  }
  return p;
}

}  // namespace iontweez
