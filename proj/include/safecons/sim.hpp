#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safecons/adversary.hpp"
#include "safecons/core.hpp"
#include "safecons/policy.hpp"
#include "safecons/smoothing.hpp"

namespace safecons {

/// Which smoothing levels honest agents run. Malicious agents never smooth.
struct DefenseConfig {
  bool enabled = false;
  bool verify_neighbors = true;  // level 1: neighbor reports replaced by verified states
  bool smooth_self = true;       // level 2: own decision via two-stage smoothing
  SmoothingConfig smoothing;

  friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

struct ScenarioConfig {
  Topology topology = ring_topology(10);
  Domain domain = Domain::unit_interval();
  std::size_t rounds = 50;
  std::vector<PolicyKind> policies{PolicyKind{}};  // one per agent, or one shared entry
  HallucinationConfig hallucination;
  AttackConfig attack;
  DefenseConfig defense;
  std::vector<StateVec> initial_states;  // empty: seeded uniform over the domain
  std::uint64_t master_seed = 0;
  bool parallel = false;
  bool reverse_order = false;
  const llm::Gateway* gateway = nullptr;

  /// Normalizes (sorts the malicious set, materializes initial states) and
  /// throws on any invalid sub-config.
  void validate();
  const PolicyKind& policy_of(AgentId i) const;
};

std::vector<StateVec> seeded_uniform_states(std::size_t n, const Domain& domain, std::uint64_t master_seed);

struct StepRecord {
  std::vector<std::size_t> queries;               // own-decision queries per agent
  std::vector<std::size_t> verification_queries;  // level-1 queries issued per agent
  std::vector<bool> attack_fired;
};

/// One synchronous round: every x_i(t+1) is computed from the round-t
/// snapshot, then all are committed together.
WorldState step(const ScenarioConfig& cfg, const WorldState& world, std::size_t round, StepRecord* record = nullptr);

struct Trajectory {
  std::vector<std::vector<StateVec>> states;  // [round][agent], row 0 = initial
  std::vector<std::vector<std::size_t>> queries;
  std::vector<std::vector<std::size_t>> verification_queries;
  std::vector<std::vector<bool>> attack_fired;
  bool complete = true;
  std::string diagnostic;
  std::optional<ErrorCode> error;

  std::size_t rounds() const noexcept { return states.empty() ? 0 : states.size() - 1; }
  const std::vector<StateVec>& final_states() const { return states.back(); }
};

/// Runs cfg.rounds steps; throws on policy-unavailable / sampling-failed.
Trajectory run_scenario(ScenarioConfig cfg);

/// As run_scenario, but a failing round stops the run and the rounds so far
/// are returned with complete = false and the diagnostic set.
Trajectory run_scenario_partial(ScenarioConfig cfg);

}  // namespace safecons
