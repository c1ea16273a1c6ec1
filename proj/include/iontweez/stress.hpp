#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "iontweez/coulomb.hpp"
#include "iontweez/equilibrium.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/modes.hpp"
#include "iontweez/types.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

/// Per-ion cylindrical tweezers acting on y and z. Frequencies and offsets are
/// dimensionless in the units the pattern was built with.
struct TweezerPattern {
  Vec nu;
  PlanePositions offsets;  // N x 2 (y, z) focus offsets
  double waist = 1e-6;     // m, metadata
  double max_nu = 0.0;
  double offset_max = 0.0;

  int size() const { return static_cast<int>(nu.size()); }

  /// Offsets default to zero. Frequencies in Hz (cycles), lengths in meters.
  static TweezerPattern from_si(const UnitSystem& units, const Vec& nu_hz,
                                const PlanePositions& offsets_m, double waist_m = 1e-6,
                                double max_nu_hz = 1.0e6, double offset_max_m = 0.25e-6) {
    TweezerPattern p;
    p.nu = nu_hz.unaryExpr(
        [&](double f) { return units.frequency_from_si(constants::two_pi * f); });
    p.offsets = offsets_m.rows() == 0 ? PlanePositions::Zero(nu_hz.size(), 2)
                                      : PlanePositions(offsets_m / units.length());
    p.waist = waist_m;
    p.max_nu = units.frequency_from_si(constants::two_pi * max_nu_hz);
    p.offset_max = units.length_from_si(offset_max_m);
    p.validate();
    return p;
  }

  static TweezerPattern centered(const Vec& nu, double max_nu, double offset_max = 0.0) {
    TweezerPattern p;
    p.nu = nu;
    p.offsets = PlanePositions::Zero(nu.size(), 2);
    p.max_nu = max_nu;
    p.offset_max = offset_max;
    return p;
  }

  void validate() const {
    if (offsets.rows() != nu.size()) throw ConfigError("tweezers: offsets and nu sizes differ");
    if (!(waist > 0.0)) throw ConfigError("tweezers: waist must be positive");
    for (int i = 0; i < size(); ++i) {
      if (!(nu(i) >= 0.0) || nu(i) > max_nu * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "tweezers: nu of ion " << i << " outside [0, max_nu]";
        throw ConfigError(os.str());
      }
      if (offsets.row(i).cwiseAbs().maxCoeff() > offset_max * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "tweezers: offset of ion " << i << " exceeds offset_max";
        throw ConfigError(os.str());
      }
    }
  }

  /// nu^2 delta r as a flat 2N vector.
  Vec pull() const {
    Vec f(2 * size());
    for (int i = 0; i < size(); ++i) {
      f(2 * i) = nu(i) * nu(i) * offsets(i, 0);
      f(2 * i + 1) = nu(i) * nu(i) * offsets(i, 1);
    }
    return f;
  }
};

/// Rescale positions between two unit systems of the same ion.
inline Positions convert_positions(const Positions& r, const UnitSystem& from,
                                   const UnitSystem& to) {
  return r * (from.length() / to.length());
}

/// diag(nu_i^2) on (y_i, z_i), 2N x 2N.
inline Mat tweezer_diagonal(const TweezerPattern& pattern, int n) {
  if (pattern.size() != n) throw ConfigError("tweezer_diagonal: pattern size mismatch");
  Vec d(2 * n);
  for (int i = 0; i < n; ++i) d(2 * i) = d(2 * i + 1) = pattern.nu(i) * pattern.nu(i);
  return d.asDiagonal();
}

/// Static yz Hessian of trap plus Coulomb at the crystal's static positions.
inline Mat plane_hessian(const Positions& positions, const TrapParams& trap,
                         const UnitSystem& units) {
  return plane_block(static_hessian(positions, trap, units));
}

/// D_tot(0) = D_0(0) + diag(nu^2).
inline Mat total_plane_hessian(const Positions& positions, const TrapParams& trap,
                               const UnitSystem& units, const TweezerPattern& pattern) {
  return plane_hessian(positions, trap, units) +
         tweezer_diagonal(pattern, static_cast<int>(positions.rows()));
}

/// First-order equilibrium shift rho = D_tot(0)^-1 nu^2 delta r (flat 2N).
inline Vec stress_displacement(const Mat& d_tot0, const TweezerPattern& pattern) {
  if (d_tot0.rows() != 2 * pattern.size()) {
    throw ConfigError("stress_displacement: Hessian size mismatch");
  }
  Eigen::LLT<Mat> llt(d_tot0);
  if (llt.info() != Eigen::Success) {
    throw InstabilityError("stress_displacement: Hessian not positive definite");
  }
  return llt.solve(pattern.pull());
}

/// Coulomb third derivatives in the yz plane contracted with rho.
inline Mat coulomb_third_derivative_contraction(const PlanePositions& positions, const Vec& rho) {
  return coulomb_third_contraction<2>(positions, rho);
}

/// D_tot(rho) ~ D_tot(0) + (grad D_0) rho.
inline Mat stressed_hessian(const Mat& d_tot0, const Mat& contraction) {
  if (d_tot0.rows() != contraction.rows()) throw ConfigError("stressed_hessian: size mismatch");
  const Mat h = d_tot0 + contraction;
  return 0.5 * (h + h.transpose());
}

struct StressedState {
  PlanePositions positions;  // new yz equilibrium
  Mat hessian;               // 2N x 2N total Hessian there
  Vec displacement;          // flat 2N shift from the unstressed equilibrium
  int iterations = 0;
};

/// First-order path: shifted positions and Hessian from one linear solve.
inline StressedState first_order_stress(const Positions& positions, const TrapParams& trap,
                                        const UnitSystem& units, const TweezerPattern& pattern) {
  const Mat d_tot0 = total_plane_hessian(positions, trap, units, pattern);
  StressedState s;
  s.displacement = stress_displacement(d_tot0, pattern);
  const PlanePositions plane = plane_of(positions);
  s.positions = plane + unflatten<2>(s.displacement);
  s.hessian = stressed_hessian(d_tot0, coulomb_third_derivative_contraction(plane, s.displacement));
  return s;
}

/// Exact re-equilibration in the yz plane with offset tweezers (pseudopotential,
/// x held at zero) by Newton iteration from the first-order prediction.
inline StressedState exact_stressed_equilibrium(const Positions& positions, const TrapParams& trap,
                                                const UnitSystem& units,
                                                const TweezerPattern& pattern,
                                                double grad_tol = 1e-11, int max_iterations = 100) {
  const int n = static_cast<int>(positions.rows());
  if (pattern.size() != n) throw ConfigError("exact_stressed_equilibrium: pattern size mismatch");
  const Vec3 k = trap_curvature(trap, units);
  const PlanePositions base = plane_of(positions);
  const Vec base_flat = flatten<2>(base);
  Vec nu2(2 * n);
  Vec center(2 * n);
  for (int i = 0; i < n; ++i) {
    nu2(2 * i) = nu2(2 * i + 1) = pattern.nu(i) * pattern.nu(i);
    center(2 * i) = base(i, 0) + pattern.offsets(i, 0);
    center(2 * i + 1) = base(i, 1) + pattern.offsets(i, 1);
  }
  Vec trap_k(2 * n);
  for (int i = 0; i < n; ++i) {
    trap_k(2 * i) = k(kY);
    trap_k(2 * i + 1) = k(kZ);
  }
  auto gradient = [&](const Vec& x) -> Vec {
    return coulomb_gradient<2>(unflatten<2>(x)) + trap_k.cwiseProduct(x) +
           nu2.cwiseProduct(x - center);
  };
  auto hessian = [&](const Vec& x) -> Mat {
    Mat h = coulomb_hessian<2>(unflatten<2>(x));
    h.diagonal() += trap_k + nu2;
    return h;
  };

  // Start from the first-order prediction.
  Vec x = base_flat;
  {
    Mat h0 = hessian(base_flat);
    Eigen::LLT<Mat> llt(h0);
    if (llt.info() == Eigen::Success) x += llt.solve(pattern.pull());
  }
  // Gradient terms reach |nu^2 x|; the tolerance is relative to that scale.
  const double tol =
      grad_tol * std::max(1.0, (nu2.cwiseProduct(center.cwiseAbs()) +
                                trap_k.cwiseProduct(base_flat.cwiseAbs()))
                                   .maxCoeff());
  StressedState s;
  Vec g = gradient(x);
  for (int it = 0; it < max_iterations; ++it) {
    s.iterations = it;
    const double g_norm = g.cwiseAbs().maxCoeff();
    if (g_norm < tol) {
      s.positions = unflatten<2>(x);
      s.hessian = hessian(x);
      s.displacement = x - base_flat;
      if (Eigen::LLT<Mat>(s.hessian).info() != Eigen::Success) {
        throw InstabilityError("exact_stressed_equilibrium: converged to a saddle");
      }
      return s;
    }
    Eigen::LLT<Mat> llt(hessian(x));
    if (llt.info() != Eigen::Success) {
      throw InstabilityError("exact_stressed_equilibrium: Hessian lost definiteness");
    }
    const Vec step = -llt.solve(g);
    // Backtrack on the gradient norm; energy differences drown in roundoff here.
    double t = 1.0;
    Vec trial = x + step;
    Vec g_trial = gradient(trial);
    for (int ls = 0; ls < 30 && !(g_trial.cwiseAbs().maxCoeff() < g_norm); ++ls) {
      t *= 0.5;
      trial = x + t * step;
      g_trial = gradient(trial);
    }
    if (!(g_trial.cwiseAbs().maxCoeff() < g_norm)) break;
    x = trial;
    g = g_trial;
  }
  throw NumericalError("exact_stressed_equilibrium: no convergence");
}

/// Embed yz modes of a 2N Hessian into 3N vectors (x rows zero).
inline ModeStructure plane_modes(const Mat& h2) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(h2);
  if (eig.info() != Eigen::Success) throw NumericalError("plane_modes: eigensolver failed");
  const Eigen::Index n2 = h2.rows();
  ModeStructure ms;
  ms.frequencies.resize(n2);
  for (Eigen::Index m = 0; m < n2; ++m) {
    const double lambda = eig.eigenvalues()(m);
    if (!(lambda > 0.0)) ms.stable = false;
    ms.frequencies(m) = lambda >= 0.0 ? std::sqrt(lambda) : -std::sqrt(-lambda);
  }
  ms.modes = Mat::Zero(3 * (n2 / 2), n2);
  for (Eigen::Index a = 0; a < n2; ++a) {
    ms.modes.row(plane_to_full_index(static_cast<int>(a))) = eig.eigenvectors().row(a);
  }
  return ms;
}

struct PinnedShift {
  double max_shift = 0.0;       // meters
  double max_multiplier = 0.0;  // of the pinned orbit; > 1 means parametrically unstable
};

/// Largest period-averaged position change when centred tweezers of frequency
/// nu (dimensionless, RF time units) pin every ion of an RF crystal.
inline PinnedShift tweezer_position_shift(const TrapParams& trap, const IonCrystal& rf_crystal,
                                          double nu, const CoolingSchedule& cooling = {},
                                          const EquilibriumOptions& opts = {}) {
  if (!rf_crystal.has_trajectory()) throw ConfigError("tweezer_position_shift: needs RF crystal");
  Pinning pins{Vec::Constant(rf_crystal.n_ions, nu), rf_crystal.period_average};
  const IonCrystal pinned =
      solve_rf_equilibrium(trap, rf_crystal.units, rf_crystal, cooling, opts, &pins);
  PinnedShift out;
  out.max_shift = rf_crystal.units.length_to_si(
      (pinned.period_average - rf_crystal.period_average).rowwise().norm().maxCoeff());
  out.max_multiplier = pinned.max_multiplier;
  return out;
}

}  // namespace iontweez
