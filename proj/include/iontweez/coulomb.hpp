#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "iontweez/errors.hpp"
#include "iontweez/types.hpp"

// Analytic derivatives of the dimensionless Coulomb energy
//   V = sum_{i<j} 1 / |r_i - r_j|
// in 2 or 3 spatial dimensions. Flat indices are Dim * ion + axis.

namespace iontweez {

inline constexpr double kCoincidenceTolerance = 1e-9;

namespace detail {

[[noreturn]] inline void throw_coincident(Eigen::Index i, Eigen::Index j) {
  std::ostringstream os;
  os << "coulomb: ions " << i << " and " << j << " coincide";
  throw NumericalError(os.str());
}

}  // namespace detail

template <int Dim>
double min_separation(const Coords<Dim>& r) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) {
      best = std::min(best, (r.row(i) - r.row(j)).norm());
    }
  }
  return best;
}

template <int Dim>
double coulomb_energy(const Coords<Dim>& r) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) {
      const double s = (r.row(i) - r.row(j)).norm();
      if (s < kCoincidenceTolerance) detail::throw_coincident(i, j);
      e += 1.0 / s;
    }
  }
  return e;
}

template <int Dim>
Vec coulomb_gradient(const Coords<Dim>& r) {
  Vec g = Vec::Zero(r.size());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) {
      const Eigen::Matrix<double, Dim, 1> d = (r.row(i) - r.row(j)).transpose();
      const double s = d.norm();
      if (s < kCoincidenceTolerance) detail::throw_coincident(i, j);
      const Eigen::Matrix<double, Dim, 1> f = d / (s * s * s);
      g.template segment<Dim>(Dim * i) -= f;
      g.template segment<Dim>(Dim * j) += f;
    }
  }
  return g;
}

template <int Dim>
Mat coulomb_hessian(const Coords<Dim>& r) {
  using Block = Eigen::Matrix<double, Dim, Dim>;
  Mat h = Mat::Zero(r.size(), r.size());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) {
      const Eigen::Matrix<double, Dim, 1> d = (r.row(i) - r.row(j)).transpose();
      const double s = d.norm();
      if (s < kCoincidenceTolerance) detail::throw_coincident(i, j);
      const double inv3 = 1.0 / (s * s * s);
      const double inv5 = inv3 / (s * s);
      // Hessian of 1/|d| with respect to d; traceless.
      const Block pair = 3.0 * inv5 * d * d.transpose() - inv3 * Block::Identity();
      h.template block<Dim, Dim>(Dim * i, Dim * i) += pair;
      h.template block<Dim, Dim>(Dim * j, Dim * j) += pair;
      h.template block<Dim, Dim>(Dim * i, Dim * j) -= pair;
      h.template block<Dim, Dim>(Dim * j, Dim * i) -= pair;
    }
  }
  return h;
}

/// Directional derivative of the Coulomb Hessian along the displacement rho:
/// sum_c d^3 V / (dr_a dr_b dr_c) rho_c.
template <int Dim>
Mat coulomb_third_contraction(const Coords<Dim>& r, const Vec& rho) {
  using Block = Eigen::Matrix<double, Dim, Dim>;
  using Col = Eigen::Matrix<double, Dim, 1>;
  if (rho.size() != r.size()) {
    throw ConfigError("coulomb_third_contraction: displacement size mismatch");
  }
  Mat c = Mat::Zero(r.size(), r.size());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < r.rows(); ++j) {
      const Col d = (r.row(i) - r.row(j)).transpose();
      const double s = d.norm();
      if (s < kCoincidenceTolerance) detail::throw_coincident(i, j);
      const Col delta = rho.template segment<Dim>(Dim * i) - rho.template segment<Dim>(Dim * j);
      const double inv5 = 1.0 / std::pow(s, 5);
      const double inv7 = inv5 / (s * s);
      const double d_dot = d.dot(delta);
      // T_abc delta_c with T_abc = -15 d_a d_b d_c / s^7
      //                           + 3 (d_a delta_bc + d_b delta_ac + d_c delta_ab) / s^5
      const Block pair = -15.0 * inv7 * d_dot * d * d.transpose() +
                         3.0 * inv5 * (d * delta.transpose() + delta * d.transpose() +
                                       d_dot * Block::Identity());
      c.template block<Dim, Dim>(Dim * i, Dim * i) += pair;
      c.template block<Dim, Dim>(Dim * j, Dim * j) += pair;
      c.template block<Dim, Dim>(Dim * i, Dim * j) -= pair;
      c.template block<Dim, Dim>(Dim * j, Dim * i) -= pair;
    }
  }
  return c;
}

}  // namespace iontweez
