#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mock_transport.hpp"
#include "oracles.hpp"
#include "safecons/experiment.hpp"
#include "safecons/metrics.hpp"
#include "safecons/sim.hpp"

using namespace safecons;

namespace {

ScenarioConfig honest_ring(std::size_t n, double w) {
  ScenarioConfig cfg;
  cfg.topology = ring_topology(n);
  cfg.policies = {PolicyKind{PolicyTag::kMeanAggregation, 0.0, w}};
  return cfg;
}

ScenarioConfig attacked_ring(bool defense, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.rounds = 30;
  cfg.master_seed = seed;
  cfg.policies = {PolicyKind{PolicyTag::kLlmMimic, 0.05, 0.5}};
  cfg.hallucination.p_h = 0.05;
  cfg.attack.malicious = {2, 7};
  cfg.attack.p_attack = 1.0;
  cfg.attack.delta_max = 0.3;
  cfg.defense.enabled = defense;
  return cfg;
}

}  // namespace

TEST(Step, MidpointOnTwoRing) {
  auto cfg = honest_ring(2, 0.5);
  cfg.initial_states = {StateVec{0.4}, StateVec{0.6}};
  cfg.validate();
  const auto next = step(cfg, WorldState{0, cfg.initial_states}, 0);
  EXPECT_DOUBLE_EQ(next.states[0][0], 0.5);
  EXPECT_DOUBLE_EQ(next.states[1][0], 0.5);
  EXPECT_EQ(next.round, 1u);
}

TEST(Step, ConsensusIsFixedPoint) {
  auto cfg = honest_ring(10, 0.5);
  cfg.initial_states.assign(10, StateVec{0.7});
  cfg.rounds = 20;
  const auto traj = run_scenario(cfg);
  for (const auto& row : traj.states)
    for (const auto& s : row) EXPECT_DOUBLE_EQ(s[0], 0.7);
}

TEST(Step, BiasedReportShiftsNeighbors) {
  auto cfg = honest_ring(10, 0.5);
  cfg.initial_states.assign(10, StateVec{0.5});
  cfg.attack.malicious = {3};
  cfg.attack.p_attack = 1.0;
  cfg.attack.delta_max = 0.3;
  cfg.validate();
  StepRecord rec;
  const auto next = step(cfg, WorldState{0, cfg.initial_states}, 0, &rec);
  const double shift = 0.5 * 0.3 / 2;
  EXPECT_NEAR(next.states[2][0], 0.5 + shift, 1e-15);
  EXPECT_NEAR(next.states[4][0], 0.5 + shift, 1e-15);
  EXPECT_DOUBLE_EQ(next.states[3][0], 0.5);
  EXPECT_DOUBLE_EQ(next.states[0][0], 0.5);
  EXPECT_TRUE(rec.attack_fired[3]);
  EXPECT_EQ(std::count(rec.attack_fired.begin(), rec.attack_fired.end(), true), 1);
}

TEST(Run, MatchesLinearRecursion) {
  for (double w : {0.5, 1.0 / 3.0}) {
    auto cfg = honest_ring(10, w);
    cfg.rounds = 50;
    cfg.master_seed = 9;
    const auto traj = run_scenario(cfg);
    std::vector<double> x0;
    for (const auto& s : traj.states[0]) x0.push_back(s[0]);
    const auto ref = oracle::ring_linear_recursion(x0, w, 50);
    for (std::size_t t = 0; t <= 50; ++t)
      for (std::size_t i = 0; i < 10; ++i) ASSERT_NEAR(traj.states[t][i][0], ref[t][i], 1e-12);
  }
}

TEST(Run, HonestDisagreementContracts) {
  auto cfg = honest_ring(10, 0.5);
  cfg.rounds = 200;
  const auto traj = run_scenario(cfg);
  double last = consensus_error(traj.states[1]);
  for (std::size_t t = 2; t < traj.states.size(); ++t) {
    const double e = consensus_error(traj.states[t]);
    EXPECT_LE(e, last + 1e-15);
    last = e;
  }
  EXPECT_LT(last, 1e-8);
}

TEST(Run, StatesStayInDomainAndFlagsOnlyMalicious) {
  const auto traj = run_scenario(attacked_ring(true, 4));
  for (std::size_t t = 0; t < traj.states.size(); ++t)
    for (std::size_t i = 0; i < 10; ++i) {
      ASSERT_TRUE(Domain::unit_interval().contains(traj.states[t][i]));
      if (traj.attack_fired[t][i]) ASSERT_TRUE(i == 2 || i == 7);
    }
}

TEST(Run, DefenseQueryCounts) {
  const auto cfg = attacked_ring(true, 1);
  const auto traj = run_scenario(cfg);
  const auto& s = cfg.defense.smoothing;
  for (std::size_t t = 1; t < traj.queries.size(); ++t)
    for (std::size_t i = 0; i < 10; ++i) {
      if (i == 2 || i == 7) {
        EXPECT_EQ(traj.queries[t][i], 1u);
        continue;
      }
      EXPECT_GE(traj.queries[t][i], s.m1);
      EXPECT_LE(traj.queries[t][i], s.m1 + s.m_max);
    }
}

TEST(Run, DeterministicAcrossOrderAndThreads) {
  for (bool defense : {false, true}) {
    const auto cfg = attacked_ring(defense, 11);
    const auto reference = cli::trajectory_csv(run_scenario(cfg));
    auto reversed = cfg;
    reversed.reverse_order = true;
    auto parallel = cfg;
    parallel.parallel = true;
    EXPECT_EQ(cli::trajectory_csv(run_scenario(cfg)), reference);
    EXPECT_EQ(cli::trajectory_csv(run_scenario(reversed)), reference);
    EXPECT_EQ(cli::trajectory_csv(run_scenario(parallel)), reference);
  }
}

TEST(Run, SeedsChangeTrajectories) {
  EXPECT_NE(cli::trajectory_csv(run_scenario(attacked_ring(false, 1))),
            cli::trajectory_csv(run_scenario(attacked_ring(false, 2))));
}

TEST(Run, PartialRunReportsFailure) {
  auto transport = std::make_shared<FailingAfterTransport>(25, "0.5");
  llm::GatewayConfig gcfg;
  gcfg.max_retries = 0;
  const llm::Gateway gateway(gcfg, transport, "", [](std::chrono::milliseconds) {});
  auto cfg = attacked_ring(false, 0);
  cfg.policies = {PolicyKind{PolicyTag::kExternalLlm, 0.0, 0.5}};
  cfg.gateway = &gateway;
  const auto traj = run_scenario_partial(cfg);
  EXPECT_FALSE(traj.complete);
  EXPECT_EQ(traj.rounds(), 2u);  // 10 queries per round, the third round fails
  ASSERT_TRUE(traj.error.has_value());
  EXPECT_EQ(*traj.error, ErrorCode::kPolicyUnavailable);
  EXPECT_NE(traj.diagnostic.find("round 2"), std::string::npos) << traj.diagnostic;
  EXPECT_THROW(run_scenario(cfg), Error);
}

TEST(Run, ExternalPolicyNeedsGateway) {
  auto cfg = attacked_ring(false, 0);
  cfg.policies = {PolicyKind{PolicyTag::kExternalLlm, 0.0, 0.5}};
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Scenario, ValidationErrors) {
  auto cfg = honest_ring(10, 0.5);
  cfg.initial_states = {StateVec{0.5}};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = honest_ring(10, 0.5);
  cfg.initial_states.assign(10, StateVec{1.5});
  EXPECT_THROW(cfg.validate(), Error);
  cfg = honest_ring(10, 0.5);
  cfg.policies.assign(3, PolicyKind{});
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Metrics, Deviation) {
  const std::vector<StateVec> a{{0.5}, {0.6}}, b{{0.4}, {0.5}};
  const auto d = deviation(a, b);
  EXPECT_NEAR(d[0][0], 0.1, 1e-15);
  EXPECT_NEAR(d[1][0], 0.1, 1e-15);
  EXPECT_EQ(deviation(a, a)[0], StateVec{0.0});
  const std::vector<StateVec> p{{3, 4, 0}}, q{{0, 0, 0}};
  EXPECT_DOUBLE_EQ(deviation_magnitudes(deviation(p, q))[0], 5.0);
}

TEST(Metrics, NormalAverage) {
  const std::vector<StateVec> d{{0.1}, {9.0}, {-0.3}};
  const std::vector<AgentId> normal{0, 2};
  EXPECT_NEAR(normal_avg_deviation(d, normal), 0.2, 1e-15);
  const std::vector<AgentId> reordered{2, 0};
  EXPECT_DOUBLE_EQ(normal_avg_deviation(d, reordered), normal_avg_deviation(d, normal));
  EXPECT_DOUBLE_EQ(normal_avg_deviation(std::vector<StateVec>(3, StateVec{0.0}), normal), 0.0);
  EXPECT_THROW(normal_avg_deviation(d, std::vector<AgentId>{}), Error);
}

TEST(Metrics, Improvement) {
  EXPECT_NEAR(*improvement_pct(0.2, 0.1), 50.0, 1e-12);
  EXPECT_NEAR(*improvement_pct(0.2, 0.2), 0.0, 1e-12);
  EXPECT_NEAR(*improvement_pct(0.1251, 0.0129), 89.69, 0.005);
  EXPECT_LT(*improvement_pct(0.1, 0.2), 0.0);
  EXPECT_FALSE(improvement_pct(0.0, 0.1).has_value());
}

TEST(Metrics, PerAgentImprovement) {
  const std::vector<StateVec> nodef{{0.2}, {0.4}, {0.0}}, def{{0.1}, {0.1}, {0.0}};
  EXPECT_NEAR(*per_agent_improvement_pct(nodef, def), (50.0 + 75.0) / 2, 1e-12);
}

TEST(Metrics, ConsensusError) {
  EXPECT_DOUBLE_EQ(consensus_error(std::vector<StateVec>(4, StateVec{0.3})), 0.0);
  EXPECT_NEAR(consensus_error(std::vector<StateVec>{{0.2}, {0.9}}), 0.7, 1e-15);
  EXPECT_NEAR(consensus_error(std::vector<StateVec>{{0.1}, {0.5}, {0.9}}), 0.8, 1e-15);
}

TEST(Metrics, FinalWindow) {
  Trajectory traj;
  traj.states = {{StateVec{0.0}}, {StateVec{0.2}}, {StateVec{0.4}}};
  EXPECT_DOUBLE_EQ(final_states(traj)[0][0], 0.4);
  EXPECT_NEAR(final_states(traj, 2)[0][0], 0.3, 1e-15);
}

TEST(Metrics, CompareScenarios) {
  const std::vector<StateVec> base{{0.5}, {0.5}, {0.5}}, nodef{{0.7}, {0.9}, {0.6}}, def{{0.55}, {0.9}, {0.55}};
  const std::vector<AgentId> normal{0, 2};
  const auto r = compare_scenarios(base, nodef, def, normal);
  EXPECT_NEAR(r.avg_no_def, 0.15, 1e-12);
  EXPECT_NEAR(r.avg_def, 0.05, 1e-12);
  EXPECT_NEAR(*r.improvement, 100.0 * 2.0 / 3.0, 1e-9);
}
