#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "iontweez/coulomb.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/integrator.hpp"
#include "iontweez/types.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

/// Friction profile f(t) used to cool the full RF equations of motion into
/// the periodic equilibrium orbit. f(0) = initial_friction, f(t_max) = 0.
struct CoolingSchedule {
  enum class Profile { linear, cosine };

  Profile profile = Profile::linear;
  double periods = 400.0;  // t_max in drive periods
  double initial_friction = 1.0;

  double friction(double t, double t_max) const {
    if (t >= t_max) return 0.0;
    const double s = std::clamp(t / t_max, 0.0, 1.0);
    switch (profile) {
      case Profile::cosine:
        return initial_friction * 0.5 * (1.0 + std::cos(std::numbers::pi * s));
      case Profile::linear:
      default:
        return initial_friction * (1.0 - s);
    }
  }
};

struct EquilibriumOptions {
  double grad_tol = 1e-10;
  int max_iterations = 200000;
  double min_separation = 1e-3;
  double jitter = 0.1;  // seeded jitter around the lattice ansatz, in d
  int steps_per_period = 256;
  int integrator_order = 4;
  double periodicity_tol = 1e-8;
  double drift_tol = 1e-8;
  int max_shooting_iterations = 40;
};

/// Equilibrium configuration of the crystal. Ions are labelled in ascending
/// order of z (ties broken by y) by the static solver; the RF solver keeps the
/// labelling of its initial guess.
struct IonCrystal {
  int n_ions = 0;
  UnitSystem units;
  std::uint64_t seed = 0;
  Positions static_positions;
  /// Samples at t_k = k * pi / T, k = 0..T (both period endpoints), empty for
  /// pseudopotential solutions.
  std::vector<Positions> trajectory;
  Positions period_average;
  double periodicity_error = 0.0;
  double kinetic_drift = 0.0;
  /// Largest |Floquet multiplier| of the orbit's one-period map; > 1 means the
  /// periodic orbit exists but is linearly unstable.
  double max_multiplier = 0.0;

  bool has_trajectory() const { return !trajectory.empty(); }
  int samples_per_period() const { return static_cast<int>(trajectory.size()) - 1; }
  double period() const { return std::numbers::pi; }

  /// Reference points: period average for RF solutions, static positions otherwise.
  const Positions& reference_positions() const {
    return has_trajectory() ? period_average : static_positions;
  }
};

inline Positions time_average(const std::vector<Positions>& trajectory) {
  if (trajectory.size() < 2) throw ConfigError("time_average: need at least two samples");
  Positions avg = Positions::Zero(trajectory.front().rows(), 3);
  const std::size_t samples = trajectory.size() - 1;
  for (std::size_t k = 0; k < samples; ++k) avg += trajectory[k];
  return avg / static_cast<double>(samples);
}

namespace detail {

struct StaticPotential {
  Vec3 curvature;

  double energy(const Positions& r) const {
    double e = coulomb_energy<3>(r);
    for (int axis = 0; axis < 3; ++axis) e += 0.5 * curvature(axis) * r.col(axis).squaredNorm();
    return e;
  }

  Vec gradient(const Positions& r) const {
    Vec g = coulomb_gradient<3>(r);
    const Vec x = flatten<3>(r);
    for (Eigen::Index k = 0; k < g.size(); ++k) g(k) += curvature(k % 3) * x(k);
    return g;
  }

  Mat hessian(const Positions& r) const {
    Mat h = coulomb_hessian<3>(r);
    for (Eigen::Index k = 0; k < h.rows(); ++k) h(k, k) += curvature(k % 3);
    return h;
  }
};

inline void guard_separation(const Positions& r, double limit, const char* who) {
  if (r.rows() > 1 && min_separation<3>(r) < limit) {
    throw NumericalError(std::string(who) + ": ions collided (separation below guard)");
  }
}

/// Sort ions by z, then y, then x.
inline Positions sorted_by_z(const Positions& r) {
  std::vector<int> order(r.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    if (r(i, kZ) != r(j, kZ)) return r(i, kZ) < r(j, kZ);
    if (r(i, kY) != r(j, kY)) return r(i, kY) < r(j, kY);
    return r(i, kX) < r(j, kX);
  });
  Positions out(r.rows(), 3);
  for (int i = 0; i < r.rows(); ++i) out.row(i) = r.row(order[i]);
  return out;
}

/// FIRE damped-dynamics relaxation; stops when |grad|_inf < tol.
inline Positions fire_relax(const StaticPotential& pot, Positions r, double tol, int max_steps,
                            double min_sep) {
  const Eigen::Index n = r.size();
  Vec x = flatten<3>(r);
  Vec v = Vec::Zero(n);
  const Mat h0 = pot.hessian(r);
  const double w_max = std::sqrt(h0.cwiseAbs().rowwise().sum().maxCoeff());
  double dt = 0.1 / w_max;
  const double dt_max = 1.0 / w_max;
  double alpha = 0.1;
  int since_negative = 0;
  Vec f = -pot.gradient(unflatten<3>(x));
  for (int step = 0; step < max_steps; ++step) {
    if (f.cwiseAbs().maxCoeff() < tol) break;
    const double power = f.dot(v);
    if (power > 0.0) {
      const double fn = f.norm();
      if (fn > 0.0) v = (1.0 - alpha) * v + alpha * v.norm() * f / fn;
      if (++since_negative > 5) {
        dt = std::min(1.1 * dt, dt_max);
        alpha *= 0.99;
      }
    } else {
      v.setZero();
      dt *= 0.5;
      alpha = 0.1;
      since_negative = 0;
    }
    v += 0.5 * dt * f;
    x += dt * v;
    const Positions rx = unflatten<3>(x);
    guard_separation(rx, min_sep, "solve_pseudo_equilibrium");
    f = -pot.gradient(rx);
    v += 0.5 * dt * f;
  }
  return unflatten<3>(x);
}

}  // namespace detail

/// Linear-chain ansatz along the weakest axis with seeded Gaussian jitter.
inline Positions lattice_guess(const TrapParams& trap, const UnitSystem& units, std::uint64_t seed,
                               double jitter = 0.1) {
  const int n = trap.n_ions;
  const Vec3 k = trap_curvature(trap, units);
  Eigen::Index axis = 0;
  k.minCoeff(&axis);
  // Minimum spacing of a harmonic chain, ~2.018 N^-0.559 in units of k^(-1/3).
  const double spacing =
      n > 1 ? 2.018 * std::pow(static_cast<double>(n), -0.559) / std::cbrt(k(axis)) : 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, jitter);
  Positions r = Positions::Zero(n, 3);
  for (int i = 0; i < n; ++i) {
    r(i, axis) = spacing * (i - 0.5 * (n - 1));
    if (n > 1) {
      for (int c = 0; c < 3; ++c) r(i, c) += noise(rng);
    }
  }
  return r;
}

/// Total pseudopotential energy: harmonic trap plus Coulomb.
inline double pseudo_energy(const TrapParams& trap, const UnitSystem& units, const Positions& r) {
  return detail::StaticPotential{trap_curvature(trap, units)}.energy(r);
}

inline Vec pseudo_gradient(const TrapParams& trap, const UnitSystem& units, const Positions& r) {
  return detail::StaticPotential{trap_curvature(trap, units)}.gradient(r);
}

/// Static equilibrium in the pseudopotential. FIRE relaxation from the guess,
/// then Newton polish to grad_tol. Saddle points are escaped along the
/// negative-curvature direction.
inline IonCrystal solve_pseudo_equilibrium(const TrapParams& trap, const UnitSystem& units,
                                           const Positions& initial_guess,
                                           const EquilibriumOptions& opts = {},
                                           std::uint64_t seed = 0) {
  const int n = trap.n_ions;
  if (initial_guess.rows() != n) throw ConfigError("solve_pseudo_equilibrium: guess size mismatch");
  detail::guard_separation(initial_guess, opts.min_separation, "solve_pseudo_equilibrium");
  const detail::StaticPotential pot{trap_curvature(trap, units)};
  const double e0 = pot.energy(initial_guess);

  Positions r = initial_guess;
  bool converged = false;
  for (int attempt = 0; attempt < 8 && !converged; ++attempt) {
    r = detail::fire_relax(pot, r, 1e-7, opts.max_iterations, opts.min_separation);
    for (int it = 0; it < 50; ++it) {
      const Vec g = pot.gradient(r);
      if (g.cwiseAbs().maxCoeff() < opts.grad_tol) {
        converged = true;
        break;
      }
      const Mat h = pot.hessian(r);
      Eigen::LDLT<Mat> ldlt(h);
      Vec step = -ldlt.solve(g);
      const double cap = 0.05;
      const double big = step.cwiseAbs().maxCoeff();
      if (big > cap) step *= cap / big;
      r = unflatten<3>(flatten<3>(r) + step);
      detail::guard_separation(r, opts.min_separation, "solve_pseudo_equilibrium");
    }
    if (!converged) continue;
    Eigen::SelfAdjointEigenSolver<Mat> eig(pot.hessian(r));
    const double lowest = eig.eigenvalues()(0);
    const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (lowest < -1e-10 * scale) {
      // Saddle: push along the unstable direction and relax again.
      converged = false;
      r = unflatten<3>(flatten<3>(r) + 0.2 * eig.eigenvectors().col(0));
    }
  }
  if (!converged) throw NumericalError("solve_pseudo_equilibrium: no convergence");
  r = detail::sorted_by_z(r);
  if (pot.energy(r) > e0 + 1e-12 * std::max(1.0, std::abs(e0))) {
    throw NumericalError("solve_pseudo_equilibrium: energy increased");
  }
  IonCrystal crystal;
  crystal.n_ions = n;
  crystal.units = units;
  crystal.seed = seed;
  crystal.static_positions = r;
  return crystal;
}

inline IonCrystal solve_pseudo_equilibrium(const TrapParams& trap, const UnitSystem& units,
                                           std::uint64_t seed,
                                           const EquilibriumOptions& opts = {}) {
  return solve_pseudo_equilibrium(trap, units, lattice_guess(trap, units, seed, opts.jitter), opts,
                                  seed);
}

/// Harmonic yz pinning of each ion towards a fixed center (dimensionless).
struct Pinning {
  Vec nu;             // per-ion pinning frequency
  Positions centers;  // per-ion tweezer focus
};

namespace detail {

/// Time-dependent RF trap, optionally with tweezer pinning; flat 3N coordinates.
struct RfSystem {
  Vec3 a;
  Vec3 q;
  const Pinning* pins = nullptr;

  Vec force(const Vec& x, double t) const {
    Vec f = -coulomb_gradient<3>(unflatten<3>(x));
    const double c = 2.0 * std::cos(2.0 * t);
    for (Eigen::Index k = 0; k < x.size(); ++k) f(k) -= (a(k % 3) - c * q(k % 3)) * x(k);
    if (pins) {
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (k % 3 == kX) continue;
        const double nu = pins->nu(k / 3);
        f(k) -= nu * nu * (x(k) - pins->centers(k / 3, k % 3));
      }
    }
    return f;
  }

  Mat stiffness(const Vec& x, double t) const {
    Mat h = coulomb_hessian<3>(unflatten<3>(x));
    const double c = 2.0 * std::cos(2.0 * t);
    for (Eigen::Index k = 0; k < x.size(); ++k) h(k, k) += a(k % 3) - c * q(k % 3);
    if (pins) {
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (k % 3 != kX) h(k, k) += pins->nu(k / 3) * pins->nu(k / 3);
      }
    }
    return h;
  }
};

/// One period of frictionless motion starting at t = 0; optionally propagates
/// the discrete Jacobian d(x_end, v_end) / d(x0, v0).
inline void rf_period(const RfSystem& sys, const Composition& scheme, int steps, Vec& x, Vec& v,
                      Mat* jac, std::vector<Positions>* samples) {
  const Eigen::Index n = x.size();
  const double h = std::numbers::pi / steps;
  if (jac) jac->setIdentity(2 * n, 2 * n);
  if (samples) {
    samples->clear();
    samples->push_back(unflatten<3>(x));
  }
  for (int s = 0; s < steps; ++s) {
    double t = s * h;
    composed_step(
        scheme, h, t,
        [&](double dt) {
          x += dt * v;
          if (jac) jac->topRows(n) += dt * jac->bottomRows(n);
        },
        [&](double time, double dt) {
          if (jac) jac->bottomRows(n) -= dt * sys.stiffness(x, time) * jac->topRows(n);
          v += dt * sys.force(x, time);
        });
    if (samples) samples->push_back(unflatten<3>(x));
  }
}

}  // namespace detail

/// Periodic equilibrium orbit of the full RF equations of motion in rescaled
/// time (drive cos 2t, period pi). Friction-cooled from the guess, then the
/// orbit is polished by Newton shooting on the one-period map and sampled.
/// Optional pinning adds yz tweezer potentials (used for the tweezer-induced
/// position-shift check; equilibria elsewhere ignore tweezers).
inline IonCrystal solve_rf_equilibrium(const TrapParams& trap, const UnitSystem& units,
                                       const IonCrystal& initial_guess,
                                       const CoolingSchedule& cooling = {},
                                       const EquilibriumOptions& opts = {},
                                       const Pinning* pinning = nullptr) {
  require_rf_time_units(trap, units, "solve_rf_equilibrium");
  const int n = trap.n_ions;
  const Positions& guess = initial_guess.reference_positions();
  if (guess.rows() != n) throw ConfigError("solve_rf_equilibrium: guess size mismatch");
  if (opts.steps_per_period < 2) throw ConfigError("solve_rf_equilibrium: steps_per_period < 2");
  detail::guard_separation(guess, opts.min_separation, "solve_rf_equilibrium");

  if (pinning && (pinning->nu.size() != n || pinning->centers.rows() != n)) {
    throw ConfigError("solve_rf_equilibrium: pinning size mismatch");
  }
  const detail::RfSystem sys{trap.a, trap.q, pinning};
  const Composition scheme = Composition::of_order(opts.integrator_order);
  const int steps = opts.steps_per_period;
  const double h = std::numbers::pi / steps;

  Vec x = flatten<3>(guess);
  Vec v = Vec::Zero(x.size());

  // Cooling ramp.
  const long cool_steps = std::lround(cooling.periods * steps);
  const double t_max = cool_steps * h;
  for (long s = 0; s < cool_steps; ++s) {
    double t = s * h;
    composed_step(
        scheme, h, t, [&](double dt) { x += dt * v; },
        [&](double time, double dt) {
          const double damp = std::exp(-0.5 * dt * cooling.friction(time, t_max));
          v *= damp;
          v += dt * sys.force(x, time);
          v *= damp;
        });
    if (s % steps == 0) detail::guard_separation(unflatten<3>(x), opts.min_separation,
                                                 "solve_rf_equilibrium");
  }

  // Newton shooting: find (x0, v0) with P(x0, v0) = (x0, v0).
  const Eigen::Index dim = x.size();
  double residual = std::numeric_limits<double>::infinity();
  Mat jac;
  for (int it = 0; it < opts.max_shooting_iterations; ++it) {
    Vec xe = x;
    Vec ve = v;
    detail::rf_period(sys, scheme, steps, xe, ve, &jac, nullptr);
    Vec g(2 * dim);
    g << xe - x, ve - v;
    const double next = g.cwiseAbs().maxCoeff();
    if (next < 1e-13 || (it > 2 && next >= 0.5 * residual && next < opts.periodicity_tol)) {
      residual = next;
      break;
    }
    residual = next;
    Mat lhs = jac - Mat::Identity(2 * dim, 2 * dim);
    const Vec delta = lhs.partialPivLu().solve(-g);
    x += delta.head(dim);
    v += delta.tail(dim);
  }

  IonCrystal crystal;
  crystal.n_ions = n;
  crystal.units = units;
  crystal.seed = initial_guess.seed;
  crystal.static_positions = initial_guess.static_positions;
  if (jac.size() > 0) {
    Eigen::EigenSolver<Mat> floquet(jac, false);
    crystal.max_multiplier = floquet.eigenvalues().cwiseAbs().maxCoeff();
  }
  Vec xs = x;
  Vec vs = v;
  const double ke0 = 0.5 * vs.squaredNorm();
  detail::rf_period(sys, scheme, steps, xs, vs, nullptr, &crystal.trajectory);
  crystal.period_average = time_average(crystal.trajectory);
  crystal.periodicity_error =
      (crystal.trajectory.back() - crystal.trajectory.front()).rowwise().norm().maxCoeff();
  crystal.kinetic_drift = std::abs(0.5 * vs.squaredNorm() - ke0);

  if (!(crystal.periodicity_error < opts.periodicity_tol)) {
    std::ostringstream os;
    os << "solve_rf_equilibrium: orbit not periodic (error " << crystal.periodicity_error
       << "); increase cooling time";
    throw NumericalError(os.str());
  }
  if (!(crystal.kinetic_drift < opts.drift_tol)) {
    throw NumericalError("solve_rf_equilibrium: kinetic energy drift over recorded period");
  }
  for (const Positions& sample : crystal.trajectory) {
    detail::guard_separation(sample, opts.min_separation, "solve_rf_equilibrium");
  }
  // Each averaged ion must remain closest to its own guess position.
  for (int i = 0; i < n; ++i) {
    Eigen::Index nearest = 0;
    (guess.rowwise() - crystal.period_average.row(i)).rowwise().squaredNorm().minCoeff(&nearest);
    if (nearest != i) {
      throw InstabilityError("solve_rf_equilibrium: crystal reordered relative to the guess");
    }
  }
  return crystal;
}

/// First-order micromotion amplitude (1/2) q_alpha R_{i,alpha} (signed).
inline Positions micromotion_amplitude_first_order(const IonCrystal& crystal,
                                                   const TrapParams& trap) {
  Positions amp = crystal.reference_positions();
  for (int axis = 0; axis < 3; ++axis) amp.col(axis) *= 0.5 * trap.q(axis);
  return amp;
}

}  // namespace iontweez
