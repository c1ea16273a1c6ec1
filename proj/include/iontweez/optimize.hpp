#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "iontweez/anneal.hpp"
#include "iontweez/coupling.hpp"
#include "iontweez/equilibrium.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/modes.hpp"
#include "iontweez/stress.hpp"
#include "iontweez/types.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

enum class Backend { pseudopotential, floquet };

inline const char* to_string(Backend b) {
  return b == Backend::floquet ? "floquet" : "pseudopotential";
}

/// Search bounds in the dimensionless units of the problem.
struct Bounds {
  double nu_max = 0.0;
  double mu_min = 0.0;
  double mu_max = 0.0;
  double gap = 0.0;
  double offset_max = 0.0;

  /// Bounds from SI values (Hz for frequencies, meters for offsets).
  static Bounds from_si(const UnitSystem& units, double nu_max_hz = 1.0e6,
                        double mu_min_hz = 0.3e6, double mu_max_hz = 1.0e6,
                        double gap_hz = 10e3, double offset_max_m = 0.25e-6) {
    Bounds b;
    b.nu_max = units.frequency_from_si(constants::two_pi * nu_max_hz);
    b.mu_min = units.frequency_from_si(constants::two_pi * mu_min_hz);
    b.mu_max = units.frequency_from_si(constants::two_pi * mu_max_hz);
    b.gap = units.frequency_from_si(constants::two_pi * gap_hz);
    b.offset_max = units.length_from_si(offset_max_m);
    b.validate();
    return b;
  }

  void validate() const {
    if (!(nu_max > 0.0) || !(mu_min > 0.0) || !(mu_max > mu_min) || !(gap > 0.0) ||
        offset_max < 0.0) {
      throw ConfigError("bounds: must be positive and ordered (mu_min < mu_max)");
    }
  }
};

/// Everything needed to score a tweezer pattern (nu, mu) against a target.
/// `hessians` must hold static_full for the pseudopotential backend and
/// d0/d2 for the Floquet backend; both are evaluated at fixed equilibrium.
struct OptimizationProblem {
  CouplingMatrix target;
  RamanDrive drive;
  Bounds bounds;
  Backend backend = Backend::pseudopotential;
  bool doppler = false;
  bool rescale = true;
  /// partner[i] = ion mirrored onto i; empty for independent frequencies.
  std::vector<int> symmetry;
  double penalty = 1e3;

  HessianSet hessians;
  TrapParams trap;
  Positions reference;  // positions for the Doppler indices
  FloquetOptions floquet;
};

/// Pairs sorted-by-z index k with n - 1 - k (inversion through the trap centre).
inline std::vector<int> mirror_pairing(const Positions& reference) {
  const std::vector<int> order = z_order(reference);
  const int n = static_cast<int>(order.size());
  std::vector<int> partner(n);
  for (int k = 0; k < n; ++k) partner[order[k]] = order[n - 1 - k];
  return partner;
}

struct Evaluation {
  double epsilon = 1.0;
  double scale = 1.0;
  int gap_violations = 0;
  bool stable = true;
  double objective = std::numeric_limits<double>::infinity();
  CouplingMatrix engineered;
  Vec frequencies;
};

/// Objective evaluator. Parameters are [free nu..., mu]; with a symmetry
/// pairing only one frequency per pair is free.
class CouplingObjective {
 public:
  explicit CouplingObjective(OptimizationProblem problem) : p_(std::move(problem)) {
    p_.bounds.validate();
    if (!(p_.penalty > 1.0)) throw ConfigError("optimize: penalty must exceed 1");
    n_ = static_cast<int>(p_.hessians.dimension() / 3);
    if (n_ < 2 || p_.target.size() != n_) throw ConfigError("optimize: target size mismatch");
    if (p_.backend == Backend::pseudopotential && !p_.hessians.has_static()) {
      throw ConfigError("optimize: pseudopotential backend needs the static Hessian");
    }
    if (p_.backend == Backend::floquet) {
      if (!p_.hessians.has_fourier()) {
        throw ConfigError("optimize: Floquet backend needs the Fourier Hessians");
      }
      require_rf_time_units(p_.trap, p_.hessians.units, "optimize");
    }
    build_free_map();
    if (p_.doppler) {
      if (p_.reference.rows() != n_) throw ConfigError("optimize: Doppler needs positions");
      doppler_ = doppler_indices(p_.reference, p_.trap, p_.drive);
    }
    prepare_out_of_plane();
  }

  const OptimizationProblem& problem() const { return p_; }
  int n_ions() const { return n_; }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(free_.size()) + 1; }
  const std::optional<DopplerModel>& doppler() const { return doppler_; }

  Vec lower() const {
    Vec l = Vec::Zero(dimension());
    l(dimension() - 1) = p_.bounds.mu_min;
    return l;
  }
  Vec upper() const {
    Vec u = Vec::Constant(dimension(), p_.bounds.nu_max);
    u(dimension() - 1) = p_.bounds.mu_max;
    return u;
  }

  /// Per-ion frequencies from the parameter vector.
  Vec expand(const Vec& params) const {
    Vec nu(n_);
    for (int i = 0; i < n_; ++i) nu(i) = params(slot_[i]);
    return nu;
  }

  /// Parameter vector from per-ion frequencies and beatnote.
  Vec pack(const Vec& nu, double mu) const {
    Vec params(dimension());
    for (std::size_t s = 0; s < free_.size(); ++s) params(s) = nu(free_[s]);
    params(dimension() - 1) = mu;
    return params;
  }

  double operator()(const Vec& params) const {
    return evaluate(expand(params), params(dimension() - 1)).objective;
  }

  Evaluation evaluate(const Vec& nu, double mu) const {
    Evaluation ev;
    if (nu.size() != n_) throw ConfigError("optimize: frequency vector size mismatch");
    ModeStructure modes;
    try {
      modes = in_plane_modes(nu);
    } catch (const NumericalError&) {
      ev.stable = false;
      return ev;
    }
    if (!modes.stable) {
      ev.stable = false;
      return ev;
    }
    Vec all(modes.size() + x_frequencies_.size());
    all << modes.frequencies, x_frequencies_;
    ev.frequencies = all;
    for (Eigen::Index m = 0; m < all.size(); ++m) {
      if (std::abs(mu - all(m)) <= p_.bounds.gap) ++ev.gap_violations;
    }
    RamanDrive drive = p_.drive;
    drive.mu = mu;
    try {
      ev.engineered = spin_spin_matrix(modes, drive);
      if (uses_x_) {
        // The drive has an x component: add the fixed out-of-plane contribution.
        Mat u(n_, x_modes_.cols());
        for (int i = 0; i < n_; ++i) u.row(i) = drive.k(kX) * x_modes_.row(3 * i + kX);
        Vec w(x_frequencies_.size());
        for (Eigen::Index m = 0; m < w.size(); ++m) {
          w(m) = 1.0 / (mu * mu - x_frequencies_(m) * x_frequencies_(m));
        }
        ev.engineered.j += u * w.asDiagonal() * u.transpose();
        ev.engineered.j.diagonal().setZero();
      }
    } catch (const NumericalError&) {
      ev.gap_violations = std::max(ev.gap_violations, 1);
      ev.objective = 1.0 + p_.penalty * ev.gap_violations;
      return ev;
    }
    if (doppler_) ev.engineered = apply_doppler(ev.engineered, *doppler_);
    const CouplingScore score = coupling_error(ev.engineered, p_.target, p_.rescale);
    ev.epsilon = score.epsilon;
    ev.scale = score.scale;
    ev.objective = ev.epsilon + p_.penalty * ev.gap_violations;
    return ev;
  }

  /// Full mode structure (both planes) for a pattern.
  ModeStructure modes_for(const Vec& nu) const {
    if (p_.backend == Backend::pseudopotential) {
      return pseudo_modes(with_tweezers(p_.hessians, nu));
    }
    return floquet_modes(with_tweezers(p_.hessians, nu), p_.trap, p_.floquet);
  }

 private:
  void build_free_map() {
    slot_.assign(n_, -1);
    if (p_.symmetry.empty()) {
      for (int i = 0; i < n_; ++i) {
        slot_[i] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
      return;
    }
    if (static_cast<int>(p_.symmetry.size()) != n_) {
      throw ConfigError("optimize: symmetry pairing size mismatch");
    }
    for (int i = 0; i < n_; ++i) {
      const int j = p_.symmetry[i];
      if (j < 0 || j >= n_ || p_.symmetry[j] != i) {
        throw ConfigError("optimize: symmetry pairing must be an involution");
      }
      if (i <= j) {
        slot_[i] = slot_[j] = static_cast<int>(free_.size());
        free_.push_back(i);
      }
    }
  }

  /// The x (out-of-plane) block carries no tweezers, so it is solved once when
  /// it decouples from yz; each evaluation then solves only the yz block.
  void prepare_out_of_plane() {
    const Mat& ref = p_.backend == Backend::pseudopotential ? p_.hessians.static_full
                                                           : p_.hessians.d0;
    split_ = detail::plane_decoupled(ref) &&
             (p_.backend == Backend::pseudopotential || detail::plane_decoupled(p_.hessians.d2));
    if (!split_) {
      x_frequencies_.resize(0);
      uses_x_ = false;
      return;
    }
    ModeStructure x;
    if (p_.backend == Backend::pseudopotential) {
      const auto idx = detail::axis_indices(3 * n_, true);
      Eigen::SelfAdjointEigenSolver<Mat> eig(detail::select(p_.hessians.static_full, idx));
      if ((eig.eigenvalues().array() <= 0.0).any()) {
        throw InstabilityError("optimize: out-of-plane modes unstable");
      }
      x_frequencies_ = eig.eigenvalues().cwiseSqrt();
      x_modes_ = Mat::Zero(3 * n_, n_);
      for (std::size_t a = 0; a < idx.size(); ++a) x_modes_.row(idx[a]) = eig.eigenvectors().row(a);
    } else {
      FloquetOptions fo = p_.floquet;
      fo.subspace = Subspace::out_of_plane;
      x = floquet_modes(p_.hessians, p_.trap, fo);
      if (!x.stable) throw InstabilityError("optimize: out-of-plane modes unstable");
      x_frequencies_ = x.frequencies;
      x_modes_ = x.modes;
    }
    uses_x_ = p_.drive.k(kX) != 0.0;
  }

  ModeStructure in_plane_modes(const Vec& nu) const {
    if (!split_) return modes_for(nu);
    if (p_.backend == Backend::floquet) {
      FloquetOptions fo = p_.floquet;
      fo.subspace = Subspace::in_plane;
      return floquet_modes(with_tweezers(p_.hessians, nu), p_.trap, fo);
    }
    const auto idx = detail::axis_indices(3 * n_, false);
    Mat h = detail::select(p_.hessians.static_full, idx);
    for (int i = 0; i < n_; ++i) {
      h(2 * i, 2 * i) += nu(i) * nu(i);
      h(2 * i + 1, 2 * i + 1) += nu(i) * nu(i);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(h);
    if (eig.info() != Eigen::Success) throw NumericalError("optimize: eigensolver failed");
    ModeStructure ms;
    ms.frequencies.resize(idx.size());
    for (std::size_t m = 0; m < idx.size(); ++m) {
      const double lambda = eig.eigenvalues()(m);
      if (!(lambda > 0.0)) ms.stable = false;
      ms.frequencies(m) = std::sqrt(std::abs(lambda));
    }
    ms.modes = Mat::Zero(3 * n_, idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) ms.modes.row(idx[a]) = eig.eigenvectors().row(a);
    return ms;
  }

  OptimizationProblem p_;
  int n_ = 0;
  std::vector<int> free_;
  std::vector<int> slot_;
  std::optional<DopplerModel> doppler_;
  bool split_ = false;
  bool uses_x_ = false;
  Vec x_frequencies_;
  Mat x_modes_;
};

struct AnnealResult {
  Vec nu;
  double mu = 0.0;
  Positions offsets;  // empty unless offsets were optimized
  double best_epsilon = std::numeric_limits<double>::infinity();
  std::vector<TracePoint> trace;  // trace of the winning restart
  std::vector<AnnealChain> chains;
  std::uint64_t seed = 0;
  int evaluations = 0;
  Backend backend = Backend::pseudopotential;
};

/// Best-of-restarts simulated annealing over (nu, mu).
inline AnnealResult simulated_annealing(const CouplingObjective& objective,
                                        const AnnealSchedule& schedule, std::uint64_t seed,
                                        int threads = 1) {
  auto f = [&](const Vec& params) { return objective(params); };
  AnnealResult result;
  result.seed = seed;
  result.backend = objective.problem().backend;
  result.chains = anneal_restarts(f, objective.lower(), objective.upper(), schedule, seed, threads);
  const std::size_t best = best_chain(result.chains);
  const AnnealChain& chain = result.chains[best];
  result.nu = objective.expand(chain.best_params);
  result.mu = chain.best_params(objective.dimension() - 1);
  result.best_epsilon = chain.best_value;
  result.trace = chain.trace;
  for (const AnnealChain& c : result.chains) result.evaluations += c.evaluations;
  return result;
}

/// Score a pattern found with one backend using another problem (typically the
/// Floquet backend on the RF equilibrium).
inline Evaluation naive_micromotion_rescore(const AnnealResult& result,
                                            const CouplingObjective& full) {
  return full.evaluate(result.nu, result.mu);
}


enum class OffsetMode { exact, two_step };

/// Offset search for a fixed tweezer pattern in the pseudopotential (no
/// micromotion). Positions, pattern and mu share one unit system.
struct OffsetProblem {
  Positions positions;
  TrapParams trap;
  UnitSystem units;
  TweezerPattern pattern;  // nu fixed; offset_max bounds each offset component
  double mu = 0.0;
  RamanDrive drive;
  CouplingMatrix target;
  double gap = 0.0;
  double penalty = 1e3;
  bool rescale = true;
  OffsetMode mode = OffsetMode::exact;
  double threshold = 1.2;  // two-step: exact polish when screened eps < threshold * best
};

class OffsetObjective {
 public:
  explicit OffsetObjective(OffsetProblem problem) : p_(std::move(problem)) {
    n_ = static_cast<int>(p_.positions.rows());
    if (p_.pattern.size() != n_ || p_.target.size() != n_) {
      throw ConfigError("optimize_offsets: size mismatch");
    }
    if (p_.drive.k(kX) != 0.0) {
      throw ConfigError("optimize_offsets: drive must lie in the yz plane");
    }
    if (!(p_.pattern.offset_max >= 0.0)) throw ConfigError("optimize_offsets: bad offset bound");
    const Mat full = static_hessian(p_.positions, p_.trap, p_.units);
    Eigen::SelfAdjointEigenSolver<Mat> eig(detail::select(full, detail::axis_indices(3 * n_, true)));
    x_frequencies_ = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  }

  const OffsetProblem& problem() const { return p_; }
  Eigen::Index dimension() const { return 2 * n_; }
  Vec lower() const { return Vec::Constant(dimension(), -p_.pattern.offset_max); }
  Vec upper() const { return Vec::Constant(dimension(), p_.pattern.offset_max); }

  TweezerPattern pattern_for(const Vec& offsets) const {
    TweezerPattern pat = p_.pattern;
    pat.offsets = unflatten<2>(offsets);
    return pat;
  }

  /// Score with exact re-equilibration (`exact`) or the first-order path.
  Evaluation evaluate(const Vec& offsets, bool exact) const {
    Evaluation ev;
    ModeStructure modes;
    try {
      const TweezerPattern pat = pattern_for(offsets);
      const StressedState st =
          exact ? exact_stressed_equilibrium(p_.positions, p_.trap, p_.units, pat)
                : first_order_stress(p_.positions, p_.trap, p_.units, pat);
      modes = plane_modes(st.hessian);
    } catch (const Error&) {
      ev.stable = false;
      return ev;
    }
    if (!modes.stable) {
      ev.stable = false;
      return ev;
    }
    Vec all(modes.size() + x_frequencies_.size());
    all << modes.frequencies, x_frequencies_;
    ev.frequencies = all;
    for (Eigen::Index m = 0; m < all.size(); ++m) {
      if (std::abs(p_.mu - all(m)) <= p_.gap) ++ev.gap_violations;
    }
    RamanDrive drive = p_.drive;
    drive.mu = p_.mu;
    try {
      ev.engineered = spin_spin_matrix(modes, drive);
    } catch (const NumericalError&) {
      ev.gap_violations = std::max(ev.gap_violations, 1);
      ev.objective = 1.0 + p_.penalty * ev.gap_violations;
      return ev;
    }
    const CouplingScore score = coupling_error(ev.engineered, p_.target, p_.rescale);
    ev.epsilon = score.epsilon;
    ev.scale = score.scale;
    ev.objective = ev.epsilon + p_.penalty * ev.gap_violations;
    return ev;
  }

 private:
  OffsetProblem p_;
  int n_ = 0;
  Vec x_frequencies_;
};

/// SA over the 2N yz offsets of a fixed pattern, every chain starting from
/// zero offsets. In two-step mode the chain runs on first-order scores and a
/// candidate is re-scored exactly once it screens below threshold * best; the
/// result always carries an exactly evaluated epsilon.
inline AnnealResult optimize_offsets(const OffsetObjective& objective,
                                     const AnnealSchedule& schedule, std::uint64_t seed) {
  const OffsetProblem& p = objective.problem();
  const Vec zero = Vec::Zero(objective.dimension());
  const double zero_eps = objective.evaluate(zero, true).objective;
  AnnealResult result;
  result.seed = seed;
  result.backend = Backend::pseudopotential;
  result.nu = p.pattern.nu;
  result.mu = p.mu;
  Vec best_offsets = zero;
  result.best_epsilon = zero_eps;
  std::size_t best_restart = 0;
  for (int r = 0; r < schedule.restarts; ++r) {
    Vec chain_best = zero;
    double chain_best_value = zero_eps;
    std::function<double(const Vec&)> f;
    if (p.mode == OffsetMode::exact) {
      f = [&](const Vec& x) { return objective.evaluate(x, true).objective; };
    } else {
      f = [&](const Vec& x) {
        const double screened = objective.evaluate(x, false).objective;
        if (!(screened < p.threshold * chain_best_value)) return screened;
        const double exact = objective.evaluate(x, true).objective;
        if (exact < chain_best_value) {
          chain_best_value = exact;
          chain_best = x;
        }
        return exact;
      };
    }
    AnnealChain chain = anneal(f, objective.lower(), objective.upper(), schedule,
                               derive_seed(seed, r), &zero);
    if (p.mode == OffsetMode::exact) {
      chain_best = chain.best_params;
      chain_best_value = chain.best_value;
    }
    result.evaluations += chain.evaluations;
    if (chain_best_value < result.best_epsilon) {
      result.best_epsilon = chain_best_value;
      best_offsets = chain_best;
      best_restart = static_cast<std::size_t>(r);
    }
    result.chains.push_back(std::move(chain));
  }
  result.offsets = Positions::Zero(objective.dimension() / 2, 3);
  const PlanePositions plane = unflatten<2>(best_offsets);
  result.offsets.col(kY) = plane.col(0);
  result.offsets.col(kZ) = plane.col(1);
  if (!result.chains.empty()) result.trace = result.chains[best_restart].trace;
  return result;
}

}  // namespace iontweez
