#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "iontweez/coulomb.hpp"
#include "iontweez/equilibrium.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/integrator.hpp"
#include "iontweez/types.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

/// Hessians of the linearized motion. d0/d2 are the Coulomb Fourier terms of
/// D(t) ~ d0 - 2 d2 cos 2t along an RF orbit; static_full is the total static
/// Hessian (trap + Coulomb, plus tweezers when added) at static positions.
struct HessianSet {
  UnitSystem units;
  Mat d0;
  Mat d2;
  double residual = 0.0;
  Mat static_full;
  /// Extra diagonal (tweezer nu^2 on y,z) already folded into d0/static_full.
  Vec tweezer_diagonal;
  std::vector<std::string> warnings;

  bool has_fourier() const { return d0.size() > 0; }
  bool has_static() const { return static_full.size() > 0; }
  Eigen::Index dimension() const { return has_fourier() ? d0.rows() : static_full.rows(); }
};

enum class Provenance { pseudopotential, floquet };

enum class Plane { in_plane, out_of_plane };

struct ModeLabel {
  Plane plane = Plane::in_plane;
  int com_axis = -1;  // axis of a centre-of-mass mode, -1 otherwise

  bool is_com() const { return com_axis >= 0; }
};

/// Frequencies ascending (dimensionless); column m of `modes` is b_m with
/// element (3 i + alpha) = b_{i,alpha,m}.
struct ModeStructure {
  Vec frequencies;
  Mat modes;
  Provenance provenance = Provenance::pseudopotential;
  std::vector<ModeLabel> labels;
  bool stable = true;
  double symplectic_residual = 0.0;
  double multiplier_deviation = 0.0;
  double max_overlap = 0.0;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return frequencies.size(); }
};

inline const char* to_string(Provenance p) {
  return p == Provenance::floquet ? "floquet" : "pseudopotential";
}

inline const char* to_string(Plane p) {
  return p == Plane::out_of_plane ? "out_of_plane" : "in_plane";
}

/// Total static Hessian diag((Theta/w)^2) + Coulomb at the static positions.
inline Mat static_hessian(const Positions& positions, const TrapParams& trap,
                          const UnitSystem& units) {
  Mat h = coulomb_hessian<3>(positions);
  const Vec3 k = trap_curvature(trap, units);
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) += k(i % 3);
  return h;
}

inline HessianSet static_hessians(const IonCrystal& crystal, const TrapParams& trap) {
  HessianSet hs;
  hs.units = crystal.units;
  hs.static_full = static_hessian(crystal.static_positions, trap, crystal.units);
  return hs;
}

/// Fourier split of the Coulomb Hessian along a trajectory sampled at `times`,
/// which must be uniform over exactly one period [0, pi] (endpoint included).
inline HessianSet fourier_hessian(const std::vector<Positions>& trajectory,
                                  const std::vector<double>& times, const UnitSystem& units) {
  if (trajectory.size() < 3 || trajectory.size() != times.size()) {
    throw ConfigError("fourier_hessian: need matching samples and times");
  }
  const std::size_t samples = trajectory.size() - 1;
  const double h = std::numbers::pi / static_cast<double>(samples);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - times.front() - k * h) > 1e-9 * std::numbers::pi) {
      throw ConfigError("fourier_hessian: trajectory grid is not uniform over one period");
    }
  }
  std::vector<Mat> d;
  d.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) d.push_back(coulomb_hessian<3>(trajectory[k]));

  HessianSet hs;
  hs.units = units;
  const Eigen::Index dim = d.front().rows();
  hs.d0 = Mat::Zero(dim, dim);
  Mat c2 = Mat::Zero(dim, dim);
  for (std::size_t k = 0; k < samples; ++k) {
    hs.d0 += d[k];
    c2 += std::cos(2.0 * times[k]) * d[k];
  }
  hs.d0 /= static_cast<double>(samples);
  c2 *= 2.0 / static_cast<double>(samples);
  hs.d2 = -0.5 * c2;
  hs.d0 = 0.5 * (hs.d0 + hs.d0.transpose()).eval();
  hs.d2 = 0.5 * (hs.d2 + hs.d2.transpose()).eval();
  for (std::size_t k = 0; k < samples; ++k) {
    const Mat rest = d[k] - hs.d0 + 2.0 * std::cos(2.0 * times[k]) * hs.d2;
    hs.residual = std::max(hs.residual, rest.cwiseAbs().maxCoeff());
  }
  const double scale = hs.d0.cwiseAbs().maxCoeff();
  if (hs.residual > 1e-3 * scale) {
    std::ostringstream os;
    os << "fourier_hessian: discarded harmonics " << hs.residual << " exceed 1e-3 |D0| (" << scale
       << ")";
    hs.warnings.push_back(os.str());
  }
  return hs;
}

inline HessianSet fourier_hessian(const IonCrystal& crystal) {
  if (!crystal.has_trajectory()) throw ConfigError("fourier_hessian: crystal has no trajectory");
  const int samples = crystal.samples_per_period();
  std::vector<double> times(samples + 1);
  for (int k = 0; k <= samples; ++k) times[k] = k * std::numbers::pi / samples;
  return fourier_hessian(crystal.trajectory, times, crystal.units);
}

/// Fourier terms along the RF orbit plus the static Hessian at the static positions.
inline HessianSet hessian_set(const IonCrystal& crystal, const TrapParams& trap) {
  HessianSet hs = crystal.has_trajectory() ? fourier_hessian(crystal) : HessianSet{};
  hs.units = crystal.units;
  if (crystal.static_positions.rows() == crystal.n_ions) {
    hs.static_full = static_hessian(crystal.static_positions, trap, crystal.units);
  }
  return hs;
}

/// Adds nu_i^2 to the y,z diagonal of d0 and static_full (cylindrical tweezers).
inline HessianSet with_tweezers(HessianSet hs, const Vec& nu) {
  const Eigen::Index dim = hs.dimension();
  if (nu.size() * 3 != dim) throw ConfigError("with_tweezers: pinning vector size mismatch");
  Vec diag = Vec::Zero(dim);
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    diag(3 * i + kY) = nu(i) * nu(i);
    diag(3 * i + kZ) = nu(i) * nu(i);
  }
  if (hs.has_fourier()) hs.d0.diagonal() += diag;
  if (hs.has_static()) hs.static_full.diagonal() += diag;
  hs.tweezer_diagonal = hs.tweezer_diagonal.size() == dim ? Vec(hs.tweezer_diagonal + diag) : diag;
  return hs;
}

namespace detail {

inline void assign_labels(ModeStructure& ms) {
  const Eigen::Index dim = ms.modes.rows();
  const Eigen::Index n = dim / 3;
  ms.labels.assign(ms.modes.cols(), ModeLabel{});
  for (Eigen::Index m = 0; m < ms.modes.cols(); ++m) {
    double x_weight = 0.0;
    Vec3 com = Vec3::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      x_weight += ms.modes(3 * i + kX, m) * ms.modes(3 * i + kX, m);
      for (int axis = 0; axis < 3; ++axis) com(axis) += ms.modes(3 * i + axis, m);
    }
    const double norm2 = ms.modes.col(m).squaredNorm();
    ModeLabel& label = ms.labels[m];
    label.plane = x_weight > 0.5 * norm2 ? Plane::out_of_plane : Plane::in_plane;
    for (int axis = 0; axis < 3; ++axis) {
      if (com(axis) * com(axis) / static_cast<double>(n) > (1.0 - 1e-6) * norm2) {
        label.com_axis = axis;
      }
    }
  }
}

inline double max_pairwise_overlap(const Mat& modes) {
  const Mat g = modes.transpose() * modes;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) worst = std::max(worst, std::abs(g(i, j)));
  }
  return worst;
}

}  // namespace detail

/// Diagonalize the static Hessian. Negative eigenvalues mark the structure
/// unstable and are reported as negative frequencies -sqrt|lambda|.
inline ModeStructure pseudo_modes(const Mat& static_full) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(static_full);
  if (eig.info() != Eigen::Success) throw NumericalError("pseudo_modes: eigensolver failed");
  ModeStructure ms;
  ms.provenance = Provenance::pseudopotential;
  const Vec& lambda = eig.eigenvalues();
  ms.frequencies.resize(lambda.size());
  for (Eigen::Index m = 0; m < lambda.size(); ++m) {
    ms.frequencies(m) = lambda(m) >= 0.0 ? std::sqrt(lambda(m)) : -std::sqrt(-lambda(m));
    if (!(lambda(m) > 0.0)) ms.stable = false;
  }
  ms.modes = eig.eigenvectors();
  detail::assign_labels(ms);
  ms.max_overlap = detail::max_pairwise_overlap(ms.modes);
  return ms;
}

inline ModeStructure pseudo_modes(const HessianSet& hs) {
  if (!hs.has_static()) throw ConfigError("pseudo_modes: static Hessian missing");
  return pseudo_modes(hs.static_full);
}

enum class Subspace { all, in_plane, out_of_plane };

struct FloquetOptions {
  int steps_per_period = 1024;
  int integrator_order = 4;
  double stability_tol = 1e-4;
  double symplectic_tol = 1e-8;
  /// Integrate half a period and use time-reversal symmetry of the cos-only drive.
  bool half_period = true;
  /// Symmetric orthonormalization of the extracted t = 0 position vectors.
  bool orthonormalize = true;
  Subspace subspace = Subspace::all;
};

/// Canonical symplectic form [[0, I], [-I, 0]] of size 2n.
inline Mat symplectic_form(Eigen::Index n) {
  Mat j = Mat::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n).setIdentity();
  j.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return j;
}

/// One-period propagator (t: 0 -> pi) of x'' = -(a_mat - 2 q_mat cos 2t) x in
/// phase space (x, x').
inline Mat floquet_monodromy(const Mat& a_mat, const Mat& q_mat, const FloquetOptions& opts = {}) {
  const Eigen::Index n = a_mat.rows();
  const Composition scheme = Composition::of_order(opts.integrator_order);
  const int steps = opts.steps_per_period;
  if (steps < 2 || (opts.half_period && steps % 2 != 0)) {
    throw ConfigError("floquet_monodromy: steps_per_period must be even and >= 2");
  }
  const double h = std::numbers::pi / steps;
  const int run = opts.half_period ? steps / 2 : steps;
  Mat r = Mat::Zero(n, 2 * n);
  Mat v = Mat::Zero(n, 2 * n);
  r.leftCols(n).setIdentity();
  v.rightCols(n).setIdentity();
  Mat k(n, n);
  for (int s = 0; s < run; ++s) {
    double t = s * h;
    composed_step(
        scheme, h, t, [&](double dt) { r += dt * v; },
        [&](double time, double dt) {
          k = a_mat - (2.0 * std::cos(2.0 * time)) * q_mat;
          v.noalias() -= dt * (k * r);
        });
  }
  Mat phi(2 * n, 2 * n);
  phi << r, v;
  if (!opts.half_period) return phi;
  // Even drive: Phi(-t) = S Phi(t) S with S = diag(I, -I), so
  // M = Phi(-pi/2)^-1 Phi(pi/2) = S Phi(pi/2)^-1 S Phi(pi/2).
  const Mat j = symplectic_form(n);
  const Mat phi_inv = -j * phi.transpose() * j;
  Mat s_phi_inv_s = phi_inv;
  s_phi_inv_s.topRightCorner(n, n) *= -1.0;
  s_phi_inv_s.bottomLeftCorner(n, n) *= -1.0;
  return s_phi_inv_s * phi;
}

inline double symplectic_residual(const Mat& m) {
  const Mat j = symplectic_form(m.rows() / 2);
  return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

namespace detail {

struct FloquetBlock {
  Vec gamma;
  Mat vectors;  // n x n real, columns normalized
  bool stable = true;
  double multiplier_deviation = 0.0;
  double symplectic_residual = 0.0;
  std::vector<std::string> warnings;
};

inline FloquetBlock floquet_block(const Mat& a_mat, const Mat& q_mat, const FloquetOptions& opts) {
  const Eigen::Index n = a_mat.rows();
  FloquetBlock out;
  const Mat m = floquet_monodromy(a_mat, q_mat, opts);
  out.symplectic_residual = symplectic_residual(m);
  if (out.symplectic_residual > opts.symplectic_tol) {
    std::ostringstream os;
    os << "floquet_modes: monodromy symplecticity residual " << out.symplectic_residual;
    out.warnings.push_back(os.str());
  }
  Eigen::EigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("floquet_modes: eigensolver failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    out.multiplier_deviation = std::max(out.multiplier_deviation, std::abs(std::abs(lambda(i)) - 1.0));
  }
  if (out.multiplier_deviation > opts.stability_tol) out.stable = false;

  // Upper-half-plane multipliers e^{+i gamma pi}, gamma in (0, 1).
  std::vector<Eigen::Index> picked;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::arg(lambda(i)) > 1e-12 && std::arg(lambda(i)) < std::numbers::pi - 1e-12) {
      picked.push_back(i);
    }
  }
  if (static_cast<Eigen::Index>(picked.size()) != n) {
    out.stable = false;
    out.gamma = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
    out.vectors = Mat::Zero(n, n);
    out.warnings.push_back("floquet_modes: multipliers off the unit circle; no mode extraction");
    return out;
  }
  std::sort(picked.begin(), picked.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::arg(lambda(x)) < std::arg(lambda(y));
  });
  out.gamma.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index idx = picked[c];
    out.gamma(c) = std::arg(lambda(idx)) / std::numbers::pi;
    Eigen::VectorXcd u = es.eigenvectors().col(idx).head(n);
    Eigen::Index big = 0;
    u.cwiseAbs().maxCoeff(&big);
    u *= std::conj(u(big)) / std::abs(u(big));
    Vec real = u.real();
    const double norm = real.norm();
    if (!(norm > 0.0)) throw NumericalError("floquet_modes: degenerate-pair extraction failure");
    out.vectors.col(c) = real / norm;
  }
  if (opts.orthonormalize) {
    // Closest orthonormal set (symmetric orthogonalization), B (B^T B)^(-1/2).
    Eigen::SelfAdjointEigenSolver<Mat> gram(out.vectors.transpose() * out.vectors);
    if (gram.eigenvalues().minCoeff() <= 1e-8) {
      throw NumericalError("floquet_modes: extracted mode vectors are linearly dependent");
    }
    const Mat inv_sqrt = gram.eigenvectors() *
                         gram.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         gram.eigenvectors().transpose();
    out.vectors = out.vectors * inv_sqrt;
  }
  for (Eigen::Index c = 1; c < n; ++c) {
    if (std::abs(out.gamma(c) - out.gamma(c - 1)) < 1e-9) {
      out.warnings.push_back("floquet_modes: degenerate multipliers within one subspace");
      break;
    }
  }
  return out;
}

inline std::vector<Eigen::Index> axis_indices(Eigen::Index dim, bool out_of_plane) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < dim; ++k) {
    if ((k % 3 == kX) == out_of_plane) idx.push_back(k);
  }
  return idx;
}

inline Mat select(const Mat& m, const std::vector<Eigen::Index>& idx) {
  Mat out(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = m(idx[a], idx[b]);
  }
  return out;
}

inline bool plane_decoupled(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    for (Eigen::Index b = 0; b < m.cols(); ++b) {
      if ((a % 3 == kX) != (b % 3 == kX) && std::abs(m(a, b)) > 1e-12 * scale) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Floquet analysis of the linearized RF motion. A = diag(a) + D0, Q = diag(q) + D2.
/// Mode vectors: position half of the e^{+i gamma pi} eigenvector at t = 0,
/// phase-fixed so the largest component is real positive, real part,
/// renormalized, then symmetrically orthonormalized within each subspace. x and
/// yz subspaces are solved separately when decoupled.
inline ModeStructure floquet_modes(const HessianSet& hs, const TrapParams& trap,
                                   const FloquetOptions& opts = {}) {
  if (!hs.has_fourier()) throw ConfigError("floquet_modes: Fourier Hessians missing");
  require_rf_time_units(trap, hs.units, "floquet_modes");
  const Eigen::Index dim = hs.d0.rows();
  Mat a_mat = hs.d0;
  Mat q_mat = hs.d2;
  for (Eigen::Index k = 0; k < dim; ++k) {
    a_mat(k, k) += trap.a(k % 3);
    q_mat(k, k) += trap.q(k % 3);
  }

  std::vector<std::vector<Eigen::Index>> blocks;
  if (detail::plane_decoupled(a_mat) && detail::plane_decoupled(q_mat)) {
    if (opts.subspace != Subspace::in_plane) blocks.push_back(detail::axis_indices(dim, true));
    if (opts.subspace != Subspace::out_of_plane) blocks.push_back(detail::axis_indices(dim, false));
  } else {
    if (opts.subspace != Subspace::all) {
      throw ConfigError("floquet_modes: x and yz motion are coupled; subspace must be all");
    }
    std::vector<Eigen::Index> all(dim);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    blocks.push_back(all);
  }

  std::vector<std::pair<double, Vec>> collected;
  ModeStructure ms;
  ms.provenance = Provenance::floquet;
  for (const auto& idx : blocks) {
    const detail::FloquetBlock fb =
        detail::floquet_block(detail::select(a_mat, idx), detail::select(q_mat, idx), opts);
    ms.stable = ms.stable && fb.stable;
    ms.multiplier_deviation = std::max(ms.multiplier_deviation, fb.multiplier_deviation);
    ms.symplectic_residual = std::max(ms.symplectic_residual, fb.symplectic_residual);
    ms.warnings.insert(ms.warnings.end(), fb.warnings.begin(), fb.warnings.end());
    for (Eigen::Index c = 0; c < fb.gamma.size(); ++c) {
      Vec full = Vec::Zero(dim);
      for (std::size_t a = 0; a < idx.size(); ++a) full(idx[a]) = fb.vectors(a, c);
      collected.emplace_back(fb.gamma(c), std::move(full));
    }
  }
  std::stable_sort(collected.begin(), collected.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  const Eigen::Index count = static_cast<Eigen::Index>(collected.size());
  ms.frequencies.resize(count);
  ms.modes.resize(dim, count);
  for (Eigen::Index m = 0; m < count; ++m) {
    // gamma is in units of Omega_rf / 2, which is the characteristic frequency here.
    ms.frequencies(m) = collected[m].first;
    ms.modes.col(m) = collected[m].second;
  }
  detail::assign_labels(ms);
  if (ms.stable) ms.max_overlap = detail::max_pairwise_overlap(ms.modes);
  return ms;
}

struct ModeMatch {
  Eigen::Index full_index = 0;
  Eigen::Index pseudo_index = 0;
  double overlap = 0.0;
  double shift = 0.0;  // (w_full - w_pseudo) / w_full
};

struct MatchAmbiguity {
  Eigen::Index full_index = 0;
  Eigen::Index chosen = 0;
  Eigen::Index alternative = 0;
  double chosen_overlap = 0.0;
  double alternative_overlap = 0.0;
};

struct MatchResult {
  std::vector<ModeMatch> pairs;  // sorted by full_index
  std::vector<MatchAmbiguity> ambiguities;
};

/// Pair modes greedily by largest |<b_full, b_pseudo>|, each mode used once.
inline MatchResult match_and_shift(const ModeStructure& full, const ModeStructure& pseudo,
                                   double ambiguity_tol = 1e-3) {
  if (full.modes.rows() != pseudo.modes.rows() || full.size() != pseudo.size()) {
    throw ConfigError("match_and_shift: mode structures have different sizes");
  }
  const Eigen::Index count = full.size();
  Mat overlap = (full.modes.transpose() * pseudo.modes).cwiseAbs();
  std::vector<bool> row_used(count, false);
  std::vector<bool> col_used(count, false);
  MatchResult result;
  for (Eigen::Index step = 0; step < count; ++step) {
    double best = -1.0;
    Eigen::Index bi = -1;
    Eigen::Index bj = -1;
    for (Eigen::Index i = 0; i < count; ++i) {
      if (row_used[i]) continue;
      for (Eigen::Index j = 0; j < count; ++j) {
        if (!col_used[j] && overlap(i, j) > best) {
          best = overlap(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    for (Eigen::Index j = 0; j < count; ++j) {
      if (j != bj && !col_used[j] && best - overlap(bi, j) < ambiguity_tol) {
        result.ambiguities.push_back({bi, bj, j, best, overlap(bi, j)});
      }
    }
    row_used[bi] = true;
    col_used[bj] = true;
    const double wf = full.frequencies(bi);
    result.pairs.push_back({bi, bj, best, (wf - pseudo.frequencies(bj)) / wf});
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const ModeMatch& x, const ModeMatch& y) { return x.full_index < y.full_index; });
  return result;
}

}  // namespace iontweez
