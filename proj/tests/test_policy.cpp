#include <gtest/gtest.h>

#include <cmath>

#include "safecons/policy.hpp"
#include "safecons/rng.hpp"

using namespace safecons;

namespace {

PolicyInput input1(double own, std::vector<double> nbrs) {
  PolicyInput in;
  in.own = StateVec{own};
  for (std::size_t j = 0; j < nbrs.size(); ++j) in.neighbors.emplace_back(j + 1, StateVec{nbrs[j]});
  return in;
}

PolicyKind mean_kind(double w) { return PolicyKind{PolicyTag::kMeanAggregation, 0.0, w}; }

const Domain kUnit = Domain::unit_interval();

}  // namespace

TEST(Policy, MeanAggregationMidpoint) {
  Stream s(1);
  EXPECT_DOUBLE_EQ(evaluate_policy(mean_kind(0.5), input1(0.4, {0.6}), kUnit, s)[0], 0.5);
}

TEST(Policy, MeanAggregationZeroSelfWeight) {
  Stream s(1);
  EXPECT_NEAR(evaluate_policy(mean_kind(0.0), input1(0.9, {0.2, 0.4}), kUnit, s)[0], 0.3, 1e-15);
}

TEST(Policy, MimicWithoutJitterMatchesMean) {
  const auto in = input1(0.3, {0.8, 0.1});
  Stream a(5), b(5);
  EXPECT_EQ(evaluate_policy(PolicyKind{PolicyTag::kLlmMimic, 0.0, 0.5}, in, kUnit, a),
            evaluate_policy(mean_kind(0.5), in, kUnit, b));
}

TEST(Policy, IsolatedAgentKeepsState) {
  Stream s(1);
  EXPECT_EQ(evaluate_policy(PolicyKind{}, input1(0.37, {}), kUnit, s), StateVec{0.37});
}

TEST(Policy, ExternalWithoutGatewayIsUnavailable) {
  Stream s(1);
  try {
    evaluate_policy(PolicyKind{PolicyTag::kExternalLlm, 0.0, 0.5}, input1(0.5, {0.5}), kUnit, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPolicyUnavailable);
  }
}

TEST(Policy, PureUnderSeeding) {
  const auto in = input1(0.3, {0.8, 0.1});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Stream a(seed), b(seed);
    EXPECT_EQ(evaluate_policy(PolicyKind{}, in, kUnit, a), evaluate_policy(PolicyKind{}, in, kUnit, b));
  }
}

TEST(Policy, OutputsStayInDomain) {
  Stream s(9);
  const PolicyKind wild{PolicyTag::kLlmMimic, 2.0, 0.5};
  for (int i = 0; i < 2000; ++i) {
    const auto in = input1(s.uniform(), {s.uniform(), s.uniform()});
    ASSERT_TRUE(kUnit.contains(evaluate_policy(wild, in, kUnit, s)));
  }
}

TEST(Policy, MimicMeanMatchesMeanAggregation) {
  const auto in = input1(0.3, {0.6, 0.5});
  const PolicyKind kind{PolicyTag::kLlmMimic, 0.05, 0.5};
  Stream ref(0);
  const double expected = evaluate_policy(mean_kind(0.5), in, kUnit, ref)[0];
  double sum = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    Stream s = SeedSpec{1, 0, 0, Purpose::kPolicy, static_cast<std::uint64_t>(k)}.stream();
    sum += evaluate_policy(kind, in, kUnit, s)[0];
  }
  EXPECT_NEAR(sum / n, expected, 3 * 0.05 / 100);
}

TEST(Policy, InvalidKindRejected) {
  EXPECT_THROW((PolicyKind{PolicyTag::kLlmMimic, -1.0, 0.5}).validate(), Error);
  EXPECT_THROW((PolicyKind{PolicyTag::kLlmMimic, 0.1, 1.5}).validate(), Error);
  EXPECT_THROW((PolicyKind{PolicyTag::kLlmMimic, NAN, 0.5}).validate(), Error);
}

TEST(Policy, NameRoundTrip) {
  for (auto tag : {PolicyTag::kMeanAggregation, PolicyTag::kLlmMimic, PolicyTag::kExternalLlm})
    EXPECT_EQ(parse_policy_tag(to_string(tag)), tag);
  for (auto m : {HallucinationMode::kUniformRandom, HallucinationMode::kFixedTarget, HallucinationMode::kLargeJump})
    EXPECT_EQ(parse_hallucination_mode(to_string(m)), m);
  EXPECT_THROW(parse_policy_tag("gpt"), Error);
}

TEST(Hallucination, ZeroProbabilityIsTransparent) {
  const PolicyKind kind{PolicyTag::kLlmMimic, 0.05, 0.5};
  HallucinationConfig hall;
  hall.p_h = 0.0;
  Stream gen(77);
  for (int i = 0; i < 100; ++i) {
    const auto in = input1(gen.uniform(), {gen.uniform(), gen.uniform()});
    Stream a(i), b(i);
    ASSERT_EQ(hallucinate_wrap(kind, hall, in, kUnit, a), evaluate_policy(kind, in, kUnit, b));
    ASSERT_EQ(a.next(), b.next());  // same stream consumption
  }
}

TEST(Hallucination, CertainFixedTarget) {
  HallucinationConfig hall;
  hall.p_h = 1.0;
  hall.mode = HallucinationMode::kFixedTarget;
  hall.target = StateVec{0.0};
  Stream gen(3);
  for (int i = 0; i < 50; ++i) {
    const auto in = input1(gen.uniform(), {gen.uniform()});
    Stream s(i);
    EXPECT_EQ(hallucinate_wrap(PolicyKind{}, hall, in, kUnit, s), StateVec{0.0});
  }
}

TEST(Hallucination, BranchFrequency) {
  HallucinationConfig hall;
  hall.p_h = 0.5;
  hall.mode = HallucinationMode::kUniformRandom;
  int fired = 0;
  const auto in = input1(0.5, {0.5});
  for (std::uint64_t k = 0; k < 10000; ++k) {
    Stream s = SeedSpec{11, 0, 0, Purpose::kPolicy, k}.stream();
    fired += hallucinate_wrap_traced(PolicyKind{}, hall, in, kUnit, s).hallucinated ? 1 : 0;
  }
  EXPECT_GE(fired, 5000 - 150);
  EXPECT_LE(fired, 5000 + 150);
}

TEST(Hallucination, LargeJumpMagnitude) {
  HallucinationConfig hall;
  hall.p_h = 1.0;
  hall.mode = HallucinationMode::kLargeJump;
  hall.magnitude = 0.3;
  const Domain box = Domain::box(10, 10, 10);
  PolicyInput in;
  in.own = StateVec{5, 5, 5};
  in.neighbors.emplace_back(1, StateVec{5, 5, 5});
  const PolicyKind kind = mean_kind(0.5);
  for (int i = 0; i < 100; ++i) {
    Stream s(i);
    EXPECT_NEAR(distance(hallucinate_wrap(kind, hall, in, box, s), StateVec{5, 5, 5}), 0.3, 1e-12);
  }
}

TEST(Hallucination, UniformStaysInDomain) {
  HallucinationConfig hall;
  hall.p_h = 1.0;
  hall.mode = HallucinationMode::kUniformRandom;
  for (int i = 0; i < 500; ++i) {
    Stream s(i);
    ASSERT_TRUE(kUnit.contains(hallucinate_wrap(PolicyKind{}, hall, input1(0.5, {0.5}), kUnit, s)));
  }
}

TEST(Hallucination, InvalidProbabilityRejected) {
  HallucinationConfig hall;
  hall.p_h = 1.5;
  EXPECT_THROW(hall.validate(), Error);
}
