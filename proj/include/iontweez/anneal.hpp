#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "iontweez/errors.hpp"
#include "iontweez/types.hpp"

namespace iontweez {

/// SplitMix64 step; used to derive independent stream seeds from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

struct AnnealSchedule {
  int budget = 30000;         // objective evaluations per chain, including the start point
  double t_initial = 0.3;
  double t_final = 1e-4;
  double step_fraction = 0.05;  // Gaussian step sigma as a fraction of the parameter range
  int restarts = 4;

  double temperature(int eval) const {
    if (budget <= 1) return t_final;
    const double s = static_cast<double>(eval) / (budget - 1);
    return t_initial * std::pow(t_final / t_initial, s);
  }
};

struct TracePoint {
  int evaluation = 0;
  double value = 0.0;
  double best = 0.0;
};

struct AnnealChain {
  Vec best_params;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<TracePoint> trace;
  std::uint64_t seed = 0;
  int evaluations = 0;
  int accepted = 0;
};

/// Single-chain simulated annealing over a box. Each proposal perturbs one
/// randomly chosen parameter by a Gaussian step and reflects it into the box.
/// The start point is drawn uniformly from the box unless `start` is given.
inline AnnealChain anneal(const std::function<double(const Vec&)>& objective, const Vec& lower,
                          const Vec& upper, const AnnealSchedule& schedule, std::uint64_t seed,
                          const Vec* start = nullptr) {
  const Eigen::Index dim = lower.size();
  if (dim == 0 || upper.size() != dim) throw ConfigError("anneal: bounds size mismatch");
  if (((upper - lower).array() < 0.0).any()) throw ConfigError("anneal: bounds out of order");
  if (schedule.budget < 1) throw ConfigError("anneal: budget must be positive");
  if (!(schedule.t_initial > 0.0 && schedule.t_final > 0.0)) {
    throw ConfigError("anneal: temperatures must be positive");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, dim - 1);
  const Vec range = upper - lower;

  AnnealChain chain;
  chain.seed = seed;
  Vec current(dim);
  if (start) {
    if (start->size() != dim) throw ConfigError("anneal: start size mismatch");
    current = start->cwiseMax(lower).cwiseMin(upper);
  } else {
    for (Eigen::Index k = 0; k < dim; ++k) current(k) = lower(k) + range(k) * unit(rng);
  }
  double value = objective(current);
  chain.best_params = current;
  chain.best_value = value;
  chain.evaluations = 1;
  chain.trace.reserve(schedule.budget);
  chain.trace.push_back({0, value, value});

  for (int eval = 1; eval < schedule.budget; ++eval) {
    Vec proposal = current;
    const Eigen::Index k = pick(rng);
    const double step = schedule.step_fraction * range(k) * gauss(rng);
    double x = proposal(k) + step;
    if (range(k) > 0.0) {
      // Reflect into [lower, upper]; repeated for steps larger than the range.
      const double period = 2.0 * range(k);
      double u = std::fmod(x - lower(k), period);
      if (u < 0.0) u += period;
      x = lower(k) + (u <= range(k) ? u : period - u);
    } else {
      x = lower(k);
    }
    proposal(k) = x;
    const double candidate = objective(proposal);
    ++chain.evaluations;
    const double t = schedule.temperature(eval);
    const double draw = unit(rng);
    bool accept = false;
    if (!std::isfinite(value)) {
      accept = true;
    } else if (std::isfinite(candidate)) {
      const double delta = candidate - value;
      accept = delta <= 0.0 || draw < std::exp(-delta / t);
    }
    if (accept) {
      current = proposal;
      value = candidate;
      ++chain.accepted;
    }
    if (candidate < chain.best_value) {
      chain.best_value = candidate;
      chain.best_params = proposal;
    }
    chain.trace.push_back({eval, candidate, chain.best_value});
  }
  return chain;
}

/// Independent restarts with seeds derived from `seed`; returns all chains in
/// restart order. `threads` > 1 runs restarts concurrently (results do not
/// depend on the thread count).
inline std::vector<AnnealChain> anneal_restarts(
    const std::function<double(const Vec&)>& objective, const Vec& lower, const Vec& upper,
    const AnnealSchedule& schedule, std::uint64_t seed, int threads = 1,
    const Vec* start = nullptr) {
  if (schedule.restarts < 1) throw ConfigError("anneal: restarts must be positive");
  std::vector<AnnealChain> chains(schedule.restarts);
  auto run = [&](int r) {
    chains[r] = anneal(objective, lower, upper, schedule, derive_seed(seed, r), start);
  };
  if (threads <= 1 || schedule.restarts == 1) {
    for (int r = 0; r < schedule.restarts; ++r) run(r);
    return chains;
  }
  std::vector<std::jthread> pool;
  const int workers = std::min(threads, schedule.restarts);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int r = w; r < schedule.restarts; r += workers) run(r);
    });
  }
  pool.clear();
  return chains;
}

inline std::size_t best_chain(const std::vector<AnnealChain>& chains) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < chains.size(); ++r) {
    if (chains[r].best_value < chains[best].best_value) best = r;
  }
  return best;
}

}  // namespace iontweez
