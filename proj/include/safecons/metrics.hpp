#pragma once

#include <optional>
#include <span>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/sim.hpp"

namespace safecons {

/// Per-agent signed deviation final_a[i] - final_baseline[i].
std::vector<StateVec> deviation(std::span<const StateVec> final_a, std::span<const StateVec> final_baseline);

/// |Delta_i| (L2 norm per agent).
std::vector<double> deviation_magnitudes(std::span<const StateVec> deltas);

/// Mean |Delta_i| over the given agents.
double normal_avg_deviation(std::span<const StateVec> deltas, std::span<const AgentId> normal_set);

/// (no_def - def) / no_def * 100; nullopt when no_def_avg is 0 (not applicable).
std::optional<double> improvement_pct(double no_def_avg, double def_avg);

/// Mean of per-agent improvement percentages over agents whose no-defense
/// deviation is nonzero; nullopt if there are none.
std::optional<double> per_agent_improvement_pct(std::span<const StateVec> no_def_deltas,
                                                std::span<const StateVec> def_deltas);

/// max_{i,j} ||x_i - x_j||.
double consensus_error(std::span<const StateVec> states);

/// Mean over the last `window` recorded rounds; window = 1 is the final state.
std::vector<StateVec> final_states(const Trajectory& traj, std::size_t window = 1);

std::vector<AgentId> normal_agents(std::size_t n, std::span<const AgentId> malicious);

struct DeviationReport {
  std::vector<AgentId> normal_set;
  std::vector<StateVec> delta_no_def;
  std::vector<StateVec> delta_def;
  double avg_no_def = 0.0;
  double avg_def = 0.0;
  std::optional<double> improvement;            // applied to the two averages
  std::optional<double> per_agent_improvement;  // group-wide, all agents
};

DeviationReport compare_scenarios(std::span<const StateVec> baseline, std::span<const StateVec> no_def,
                                  std::span<const StateVec> def, std::span<const AgentId> normal_set);

}  // namespace safecons
