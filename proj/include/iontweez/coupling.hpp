#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "iontweez/equilibrium.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/modes.hpp"
#include "iontweez/types.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

inline constexpr double kDefaultWavelength = 411e-9;  // m

/// Raman beam pair: wave vector k (dimensionless, k * d) and beatnote mu.
struct RamanDrive {
  Vec3 k = Vec3::UnitY();
  double mu = 0.0;

  /// k along `direction` with magnitude 2 pi / wavelength, expressed in units of 1/d.
  static RamanDrive from_wavelength(const Vec3& direction, double wavelength_m,
                                    const UnitSystem& units, double mu) {
    if (!(direction.norm() > 0.0)) throw ConfigError("drive: wave vector direction is zero");
    if (!(wavelength_m > 0.0)) throw ConfigError("drive: wavelength must be positive");
    if (!(mu > 0.0)) throw ConfigError("drive: beatnote must be positive");
    return {direction.normalized() * constants::two_pi / wavelength_m * units.length(), mu};
  }
};

/// Symmetric N x N coupling matrix with zero diagonal. Absolute scale is
/// arbitrary (no Rabi frequency is modelled).
struct CouplingMatrix {
  Mat j;
  bool relative = true;

  Eigen::Index size() const { return j.rows(); }
};

struct DopplerModel {
  Vec beta;
  Vec carrier_factors;
};

/// Zeroth-order Bessel function of the first kind. Power series below 8,
/// std::cyl_bessel_j beyond.
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x >= 8.0) return std::cyl_bessel_j(0.0, x);
  const double y = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -y / (static_cast<double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) && k > 2) break;
  }
  return sum;
}

/// J_ij = sum_m (k . b_im)(k . b_jm) / (mu^2 - w_m^2), zero diagonal.
inline CouplingMatrix spin_spin_matrix(const ModeStructure& modes, const RamanDrive& drive) {
  const Eigen::Index dim = modes.modes.rows();
  const Eigen::Index n = dim / 3;
  const Eigen::Index count = modes.size();
  Vec weight(count);
  for (Eigen::Index m = 0; m < count; ++m) {
    const double w = modes.frequencies(m);
    const double gap = std::abs(drive.mu - w);
    if (!(gap > 1e-14 * std::max(std::abs(drive.mu), std::abs(w)))) {
      std::ostringstream os;
      os << "spin_spin_matrix: beatnote resonant with mode " << m;
      throw NumericalError(os.str());
    }
    weight(m) = 1.0 / (drive.mu * drive.mu - w * w);
  }
  // Projection of every mode onto k at every ion: u(i, m) = k . b_{i,m}.
  Mat u(n, count);
  for (Eigen::Index i = 0; i < n; ++i) {
    u.row(i) = drive.k.transpose() * modes.modes.middleRows(3 * i, 3);
  }
  CouplingMatrix out;
  out.j = u * weight.asDiagonal() * u.transpose();
  out.j = 0.5 * (out.j + out.j.transpose()).eval();
  out.j.diagonal().setZero();
  return out;
}

/// dJ/dmu = sum_m (k . b_im)(k . b_jm) (-2 mu) / (mu^2 - w_m^2)^2.
inline CouplingMatrix spin_spin_derivative(const ModeStructure& modes, const RamanDrive& drive) {
  const Eigen::Index count = modes.size();
  const Eigen::Index n = modes.modes.rows() / 3;
  Vec weight(count);
  for (Eigen::Index m = 0; m < count; ++m) {
    const double w = modes.frequencies(m);
    const double den = drive.mu * drive.mu - w * w;
    if (den == 0.0) throw NumericalError("spin_spin_derivative: beatnote resonant with a mode");
    weight(m) = -2.0 * drive.mu / (den * den);
  }
  Mat u(n, count);
  for (Eigen::Index i = 0; i < n; ++i) {
    u.row(i) = drive.k.transpose() * modes.modes.middleRows(3 * i, 3);
  }
  CouplingMatrix out;
  out.j = u * weight.asDiagonal() * u.transpose();
  out.j = 0.5 * (out.j + out.j.transpose()).eval();
  out.j.diagonal().setZero();
  return out;
}

/// beta_i = (1/2) |sum_alpha k_alpha R_{i,alpha} q_alpha|, factor J0(beta_i).
inline DopplerModel doppler_indices(const Positions& reference, const TrapParams& trap,
                                    const RamanDrive& drive) {
  DopplerModel model;
  const Eigen::Index n = reference.rows();
  model.beta.resize(n);
  model.carrier_factors.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (int axis = 0; axis < 3; ++axis) s += drive.k(axis) * reference(i, axis) * trap.q(axis);
    model.beta(i) = 0.5 * std::abs(s);
    model.carrier_factors(i) = bessel_j0(model.beta(i));
  }
  return model;
}

inline DopplerModel doppler_indices(const IonCrystal& crystal, const TrapParams& trap,
                                    const RamanDrive& drive) {
  return doppler_indices(crystal.reference_positions(), trap, drive);
}

inline CouplingMatrix apply_doppler(const CouplingMatrix& j, const DopplerModel& model) {
  if (model.carrier_factors.size() != j.size()) {
    throw ConfigError("apply_doppler: size mismatch");
  }
  CouplingMatrix out = j;
  out.j = model.carrier_factors.asDiagonal() * j.j * model.carrier_factors.asDiagonal();
  return out;
}

struct CouplingScore {
  double epsilon = 1.0;
  double scale = 1.0;  // s applied to the engineered matrix
};

/// eps = ||J_T - s J_E||_F / ||J_T||_F over off-diagonal entries. With
/// `rescale`, s minimizes the norm (s = <J_T, J_E> / <J_E, J_E>); otherwise s = 1.
inline CouplingScore coupling_error(const CouplingMatrix& engineered, const CouplingMatrix& target,
                                    bool rescale = true) {
  if (engineered.size() != target.size()) throw ConfigError("coupling_error: size mismatch");
  Mat t = target.j;
  Mat e = engineered.j;
  t.diagonal().setZero();
  e.diagonal().setZero();
  const double t_norm = t.norm();
  if (!(t_norm > 0.0)) throw ConfigError("coupling_error: target has zero norm");
  CouplingScore score;
  if (rescale) {
    const double ee = e.squaredNorm();
    score.scale = ee > 0.0 ? (t.array() * e.array()).sum() / ee : 0.0;
  }
  score.epsilon = (t - score.scale * e).norm() / t_norm;
  return score;
}

/// Zigzag spin ladder in z order: j1 between consecutive ions, j2 between
/// next-nearest (same-leg) ions.
inline CouplingMatrix target_spin_ladder(int n, double j1, double j2) {
  if (n < 4 || n % 2 != 0) throw ConfigError("target_spin_ladder: n must be even and >= 4");
  CouplingMatrix out;
  out.j = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) out.j(i, i + 1) = out.j(i + 1, i) = j1;
  for (int i = 0; i + 2 < n; ++i) out.j(i, i + 2) = out.j(i + 2, i) = j2;
  return out;
}

/// Order of ions by ascending z of the given reference positions.
inline std::vector<int> z_order(const Positions& reference) {
  std::vector<int> order(reference.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return reference(a, kZ) < reference(b, kZ); });
  return order;
}

/// True if the legs (sign of y) alternate along the z order.
inline bool is_alternating_zigzag(const Positions& reference) {
  const std::vector<int> order = z_order(reference);
  for (std::size_t k = 1; k < order.size(); ++k) {
    if ((reference(order[k], kY) > 0.0) == (reference(order[k - 1], kY) > 0.0)) return false;
  }
  return true;
}

/// Spin ladder expressed in the crystal's ion labels (sorted by z of `reference`).
inline CouplingMatrix target_spin_ladder(const Positions& reference, double j1, double j2) {
  const int n = static_cast<int>(reference.rows());
  const CouplingMatrix sorted = target_spin_ladder(n, j1, j2);
  const std::vector<int> order = z_order(reference);
  CouplingMatrix out;
  out.j = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) out.j(order[a], order[b]) = sorted.j(a, b);
  }
  return out;
}

/// J_ij = 1 / |R_i - R_j|^xi.
inline CouplingMatrix target_power_law(const Positions& positions, double xi) {
  if (xi < 0.0 || xi > 3.0) throw ConfigError("target_power_law: exponent must be in [0, 3]");
  const Eigen::Index n = positions.rows();
  CouplingMatrix out;
  out.j = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double s = (positions.row(i) - positions.row(k)).norm();
      if (!(s > 0.0)) throw NumericalError("target_power_law: coincident ions");
      out.j(i, k) = out.j(k, i) = std::pow(s, -xi);
    }
  }
  return out;
}

}  // namespace iontweez
