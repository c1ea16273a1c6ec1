#include <set>

#include <gtest/gtest.h>

#include "iontweez/anneal.hpp"

using namespace iontweez;

namespace {

double bowl(const Vec& x) { return (x.array() - 0.3).square().sum(); }

AnnealSchedule short_schedule() {
  AnnealSchedule s;
  s.budget = 3000;
  s.restarts = 3;
  s.t_initial = 0.1;
  s.t_final = 1e-6;
  return s;
}

}  // namespace

TEST(Anneal, TemperatureEndpoints) {
  const AnnealSchedule s;
  EXPECT_DOUBLE_EQ(s.temperature(0), s.t_initial);
  EXPECT_NEAR(s.temperature(s.budget - 1), s.t_final, 1e-18);
  EXPECT_LT(s.temperature(100), s.temperature(99));
}

TEST(Anneal, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t k = 0; k < 64; ++k) seen.insert(derive_seed(s, k));
  }
  EXPECT_EQ(seen.size(), 256u);
  EXPECT_EQ(derive_seed(5, 2), derive_seed(5, 2));
}

TEST(Anneal, FindsQuadraticMinimum) {
  const Vec lo = Vec::Zero(3), hi = Vec::Ones(3);
  const auto chains = anneal_restarts(bowl, lo, hi, short_schedule(), 11);
  const AnnealChain& best = chains[best_chain(chains)];
  EXPECT_LT(best.best_value, 1e-3);
  EXPECT_EQ(best.evaluations, 3000);
}

TEST(Anneal, StaysInsideBox) {
  const Vec lo = Vec::Constant(2, -1.0), hi = Vec::Constant(2, 2.0);
  auto f = [&](const Vec& x) {
    EXPECT_TRUE((x.array() >= lo.array()).all() && (x.array() <= hi.array()).all());
    return -x.sum();  // optimum on the upper corner
  };
  const AnnealChain c = anneal(f, lo, hi, short_schedule(), 3);
  EXPECT_NEAR(c.best_params(0), 2.0, 0.05);
}

TEST(Anneal, SeedReproducibleBitExact) {
  const Vec lo = Vec::Zero(4), hi = Vec::Ones(4);
  const AnnealChain a = anneal(bowl, lo, hi, short_schedule(), 42);
  const AnnealChain b = anneal(bowl, lo, hi, short_schedule(), 42);
  EXPECT_TRUE((a.best_params.array() == b.best_params.array()).all());
  EXPECT_EQ(a.best_value, b.best_value);
  EXPECT_EQ(a.accepted, b.accepted);
  const AnnealChain c = anneal(bowl, lo, hi, short_schedule(), 43);
  EXPECT_FALSE((a.best_params.array() == c.best_params.array()).all());
}

TEST(Anneal, ThreadedRestartsMatchSerial) {
  const Vec lo = Vec::Zero(3), hi = Vec::Ones(3);
  const auto serial = anneal_restarts(bowl, lo, hi, short_schedule(), 8, 1);
  const auto threaded = anneal_restarts(bowl, lo, hi, short_schedule(), 8, 3);
  ASSERT_EQ(serial.size(), threaded.size());
  for (std::size_t r = 0; r < serial.size(); ++r) {
    EXPECT_EQ(serial[r].best_value, threaded[r].best_value);
  }
}

TEST(Anneal, TraceBestIsMonotone) {
  const AnnealChain c = anneal(bowl, Vec::Zero(2), Vec::Ones(2), short_schedule(), 5);
  ASSERT_FALSE(c.trace.empty());
  for (std::size_t k = 1; k < c.trace.size(); ++k) {
    EXPECT_LE(c.trace[k].best, c.trace[k - 1].best);
  }
}

TEST(Anneal, InvalidInputsThrow) {
  AnnealSchedule s = short_schedule();
  s.restarts = 0;
  EXPECT_THROW(anneal_restarts(bowl, Vec::Zero(2), Vec::Ones(2), s, 1), ConfigError);
  EXPECT_THROW(anneal(bowl, Vec::Ones(2), Vec::Zero(2), short_schedule(), 1), ConfigError);
}
