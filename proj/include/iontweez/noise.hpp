#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "iontweez/anneal.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/optimize.hpp"
#include "iontweez/types.hpp"

namespace iontweez {

enum class NoiseMode {
  power,   // nu' = nu sqrt(max(0, 1 + delta))
  direct,  // nu' = nu max(0, 1 + delta)
};

struct PerturbedPattern {
  Vec nu;
  int clamps = 0;
};

/// Apply per-ion fractional fluctuations delta_i = delta_p * draws_i.
inline PerturbedPattern perturb_pattern(const Vec& nu, double delta_p, const Vec& draws,
                                        NoiseMode mode = NoiseMode::power) {
  if (!(delta_p >= 0.0)) throw ConfigError("perturb_pattern: delta_p must be non-negative");
  if (draws.size() != nu.size()) throw ConfigError("perturb_pattern: draw count mismatch");
  PerturbedPattern out;
  out.nu.resize(nu.size());
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    double factor = 1.0 + delta_p * draws(i);
    if (factor < 0.0) {
      factor = 0.0;
      ++out.clamps;
    }
    out.nu(i) = nu(i) * (mode == NoiseMode::power ? std::sqrt(factor) : factor);
  }
  return out;
}

/// Standard normal draws for repeat `index`; depends only on (seed, index).
inline Vec noise_draws(std::uint64_t seed, std::uint64_t index, Eigen::Index n) {
  std::mt19937_64 rng(derive_seed(seed, index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = gauss(rng);
  return z;
}

struct NoisePoint {
  double delta_p = 0.0;
  double mean_epsilon = 0.0;
  double stderr_epsilon = 0.0;
  /// Paired difference against the previous grid point (same draws).
  double diff_mean = 0.0;
  double diff_stderr = 0.0;
  long clamps = 0;
  long instabilities = 0;
  long gap_violations = 0;
};

struct NoiseStudy {
  Vec nu;
  double mu = 0.0;
  std::vector<double> delta_p_grid;
  int n_repeat = 10000;
  std::uint64_t seed = 0;
  NoiseMode mode = NoiseMode::power;
};

/// Mean coupling error over perturbed patterns for each delta_p. Every repeat
/// uses the same normal draws at all grid points, so neighbouring points are
/// compared pairwise. Unstable draws score the objective penalty.
inline std::vector<NoisePoint> noise_sweep(const NoiseStudy& study,
                                           const CouplingObjective& objective, int threads = 1) {
  if (study.n_repeat < 1) throw ConfigError("noise_sweep: n_repeat must be at least 1");
  for (double dp : study.delta_p_grid) {
    if (!(dp >= 0.0)) throw ConfigError("noise_sweep: delta_p must be non-negative");
  }
  const std::size_t grid = study.delta_p_grid.size();
  const int reps = study.n_repeat;
  const double penalty = objective.problem().penalty;
  // eps[g * reps + k]
  std::vector<double> eps(grid * reps, 0.0);
  std::vector<int> clamp(grid * reps, 0);
  std::vector<char> unstable(grid * reps, 0);
  std::vector<int> gaps(grid * reps, 0);

  auto work = [&](int k) {
    const Vec z = noise_draws(study.seed, static_cast<std::uint64_t>(k), study.nu.size());
    for (std::size_t g = 0; g < grid; ++g) {
      const PerturbedPattern pert =
          perturb_pattern(study.nu, study.delta_p_grid[g], z, study.mode);
      const Evaluation ev = objective.evaluate(pert.nu, study.mu);
      const std::size_t at = g * reps + k;
      clamp[at] = pert.clamps;
      gaps[at] = ev.gap_violations;
      if (!ev.stable) {
        unstable[at] = 1;
        eps[at] = penalty;
      } else {
        eps[at] = ev.epsilon;
      }
    }
  };
  if (threads <= 1) {
    for (int k = 0; k < reps; ++k) work(k);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int k = w; k < reps; k += threads) work(k);
      });
    }
  }

  std::vector<NoisePoint> out(grid);
  for (std::size_t g = 0; g < grid; ++g) {
    NoisePoint& pt = out[g];
    pt.delta_p = study.delta_p_grid[g];
    double sum = 0.0;
    for (int k = 0; k < reps; ++k) {
      const std::size_t at = g * reps + k;
      sum += eps[at];
      pt.clamps += clamp[at];
      pt.instabilities += unstable[at];
      pt.gap_violations += gaps[at];
    }
    pt.mean_epsilon = sum / reps;
    double ss = 0.0;
    for (int k = 0; k < reps; ++k) ss += std::pow(eps[g * reps + k] - pt.mean_epsilon, 2);
    pt.stderr_epsilon = reps > 1 ? std::sqrt(ss / (reps - 1) / reps) : 0.0;
    if (g == 0) continue;
    double dsum = 0.0;
    for (int k = 0; k < reps; ++k) dsum += eps[g * reps + k] - eps[(g - 1) * reps + k];
    pt.diff_mean = dsum / reps;
    double dss = 0.0;
    for (int k = 0; k < reps; ++k) {
      dss += std::pow(eps[g * reps + k] - eps[(g - 1) * reps + k] - pt.diff_mean, 2);
    }
    pt.diff_stderr = reps > 1 ? std::sqrt(dss / (reps - 1) / reps) : 0.0;
  }
  return out;
}

}  // namespace iontweez
