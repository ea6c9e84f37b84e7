#include <gtest/gtest.h>

#include <cmath>

#include "safecons/adversary.hpp"
#include "safecons/rng.hpp"

using namespace safecons;

namespace {

AttackConfig bias_attack(double p, double delta) {
  AttackConfig cfg;
  cfg.malicious = {2};
  cfg.p_attack = p;
  cfg.delta_max = delta;
  cfg.strategy = AttackStrategy::kConstantBias;
  return cfg;
}

const Domain kUnit = Domain::unit_interval();

}  // namespace

TEST(Adversary, HonestAgentsReportTruth) {
  const auto cfg = bias_attack(1.0, 0.3);
  for (AgentId k : {0u, 1u, 3u}) {
    const auto out = transmit_traced(cfg, k, StateVec{0.42}, 0, kUnit, Stream(k));
    EXPECT_EQ(out.value, StateVec{0.42});
    EXPECT_FALSE(out.fired);
  }
}

TEST(Adversary, ConstantBias) {
  const auto cfg = bias_attack(1.0, 0.3);
  EXPECT_NEAR(transmit(cfg, 2, StateVec{0.5}, 0, kUnit, Stream(1))[0], 0.8, 1e-15);
}

TEST(Adversary, ConstantBiasClampedAtBoundary) {
  const auto cfg = bias_attack(1.0, 0.3);
  const auto out = transmit(cfg, 2, StateVec{0.9}, 0, kUnit, Stream(1));
  EXPECT_EQ(out, StateVec{1.0});
  EXPECT_NEAR(distance(out, StateVec{0.9}), 0.1, 1e-15);
}

TEST(Adversary, NegativeBias) {
  auto cfg = bias_attack(1.0, 0.3);
  cfg.bias_sign = -1;
  EXPECT_NEAR(transmit(cfg, 2, StateVec{0.5}, 0, kUnit, Stream(1))[0], 0.2, 1e-15);
}

TEST(Adversary, ZeroProbabilityIsIdentity) {
  const auto cfg = bias_attack(0.0, 0.3);
  for (std::size_t t = 0; t < 200; ++t)
    EXPECT_EQ(transmit(cfg, 2, StateVec{0.5}, t, kUnit, SeedSpec{0, t, 2, Purpose::kTransmit}.stream()),
              StateVec{0.5});
}

TEST(Adversary, PerturbationBoundedForAllStrategies) {
  const Domain box = Domain::box(10, 10, 10);
  for (auto strategy : {AttackStrategy::kConstantBias, AttackStrategy::kUniformBounded, AttackStrategy::kOscillating}) {
    AttackConfig cfg = bias_attack(1.0, 0.7);
    cfg.strategy = strategy;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      Stream gen(seed);
      const StateVec x1{gen.uniform()};
      const StateVec x3{gen.uniform(0, 10), gen.uniform(0, 10), gen.uniform(0, 10)};
      const auto r1 = transmit(cfg, 2, x1, seed, kUnit, Stream(seed));
      const auto r3 = transmit(cfg, 2, x3, seed, box, Stream(seed + 1));
      ASSERT_LE(distance(r1, x1), 0.7 + 1e-12);
      ASSERT_LE(distance(r3, x3), 0.7 + 1e-12);
      ASSERT_TRUE(kUnit.contains(r1));
      ASSERT_TRUE(box.contains(r3));
    }
  }
}

TEST(Adversary, ThreeDimensionalBiasIsDiagonal) {
  const Domain box = Domain::box(10, 10, 10);
  const auto cfg = bias_attack(1.0, std::sqrt(3.0));
  const auto out = transmit(cfg, 2, StateVec{5, 5, 5}, 0, box, Stream(0));
  for (double x : out) EXPECT_NEAR(x, 6.0, 1e-12);
}

TEST(Adversary, OscillatingFlipsSign) {
  auto cfg = bias_attack(1.0, 0.1);
  cfg.strategy = AttackStrategy::kOscillating;
  cfg.period = 4;
  const auto early = transmit(cfg, 2, StateVec{0.5}, 1, kUnit, Stream(0));
  const auto late = transmit(cfg, 2, StateVec{0.5}, 3, kUnit, Stream(0));
  EXPECT_NEAR(early[0] + late[0], 1.0, 1e-12);
  EXPECT_NE(early, late);
}

TEST(Adversary, FiringFrequency) {
  const auto cfg = bias_attack(0.3, 0.3);
  int fired = 0;
  for (std::size_t t = 0; t < 10000; ++t)
    fired += transmit_traced(cfg, 2, StateVec{0.5}, t, kUnit, SeedSpec{5, t, 2, Purpose::kTransmit}.stream()).fired;
  EXPECT_GE(fired, 3000 - 140);
  EXPECT_LE(fired, 3000 + 140);
}

TEST(Adversary, ScheduleOverridesConstant) {
  auto cfg = bias_attack(1.0, 0.3);
  cfg.schedule = [](std::size_t round) { return round < 5 ? 0.0 : 1.0; };
  EXPECT_FALSE(transmit_traced(cfg, 2, StateVec{0.5}, 4, kUnit, Stream(0)).fired);
  EXPECT_TRUE(transmit_traced(cfg, 2, StateVec{0.5}, 5, kUnit, Stream(0)).fired);
}

TEST(Adversary, Validation) {
  AttackConfig cfg = bias_attack(1.0, 0.3);
  cfg.malicious = {7, 3};
  cfg.validate(10, 1);
  EXPECT_EQ(cfg.malicious, (std::vector<AgentId>{3, 7}));
  cfg.malicious = {12};
  EXPECT_THROW(cfg.validate(10, 1), Error);
  cfg = bias_attack(1.5, 0.3);
  EXPECT_THROW(cfg.validate(10, 1), Error);
  cfg = bias_attack(1.0, -0.1);
  EXPECT_THROW(cfg.validate(10, 1), Error);
}

TEST(Adversary, NameRoundTrip) {
  for (auto s : {AttackStrategy::kConstantBias, AttackStrategy::kUniformBounded, AttackStrategy::kOscillating})
    EXPECT_EQ(parse_attack_strategy(to_string(s)), s);
  EXPECT_THROW(parse_attack_strategy("sneaky"), Error);
}
