#include "safecons/metrics.hpp"

#include <algorithm>

namespace safecons {

std::vector<StateVec> deviation(std::span<const StateVec> final_a, std::span<const StateVec> final_baseline) {
  if (final_a.size() != final_baseline.size())
    throw Error(ErrorCode::kInvalidArgument, "deviation: agent counts differ");
  std::vector<StateVec> out;
  out.reserve(final_a.size());
  for (std::size_t i = 0; i < final_a.size(); ++i) {
    if (final_a[i].dim() != final_baseline[i].dim())
      throw Error(ErrorCode::kInvalidArgument, "deviation: state dimensions differ");
    out.push_back(final_a[i] - final_baseline[i]);
  }
  return out;
}

std::vector<double> deviation_magnitudes(std::span<const StateVec> deltas) {
  std::vector<double> out;
  out.reserve(deltas.size());
  for (const auto& d : deltas) out.push_back(norm2(d));
  return out;
}

double normal_avg_deviation(std::span<const StateVec> deltas, std::span<const AgentId> normal_set) {
  if (normal_set.empty()) throw Error(ErrorCode::kInvalidArgument, "normal agent set is empty");
  double sum = 0.0;
  for (AgentId i : normal_set) {
    if (i >= deltas.size()) throw Error(ErrorCode::kInvalidAgent, "normal agent out of range");
    sum += norm2(deltas[i]);
  }
  return sum / static_cast<double>(normal_set.size());
}

std::optional<double> improvement_pct(double no_def_avg, double def_avg) {
  if (no_def_avg == 0.0) return std::nullopt;
  return (no_def_avg - def_avg) / no_def_avg * 100.0;
}

std::optional<double> per_agent_improvement_pct(std::span<const StateVec> no_def_deltas,
                                                std::span<const StateVec> def_deltas) {
  if (no_def_deltas.size() != def_deltas.size())
    throw Error(ErrorCode::kInvalidArgument, "per-agent improvement: agent counts differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < no_def_deltas.size(); ++i) {
    if (auto pct = improvement_pct(norm2(no_def_deltas[i]), norm2(def_deltas[i]))) {
      sum += *pct;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

double consensus_error(std::span<const StateVec> states) {
  double worst = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j) worst = std::max(worst, distance(states[i], states[j]));
  return worst;
}

std::vector<StateVec> final_states(const Trajectory& traj, std::size_t window) {
  if (traj.states.empty()) throw Error(ErrorCode::kInvalidArgument, "empty trajectory");
  window = std::clamp<std::size_t>(window, 1, traj.states.size());
  const std::size_t n = traj.states.back().size();
  std::vector<StateVec> out(n, StateVec(traj.states.back().front().dim()));
  for (std::size_t r = traj.states.size() - window; r < traj.states.size(); ++r)
    for (std::size_t i = 0; i < n; ++i) out[i] += traj.states[r][i];
  for (auto& s : out) s *= 1.0 / static_cast<double>(window);
  if (window == 1) return traj.states.back();
  return out;
}

std::vector<AgentId> normal_agents(std::size_t n, std::span<const AgentId> malicious) {
  std::vector<AgentId> out;
  for (AgentId i = 0; i < n; ++i)
    if (std::find(malicious.begin(), malicious.end(), i) == malicious.end()) out.push_back(i);
  return out;
}

DeviationReport compare_scenarios(std::span<const StateVec> baseline, std::span<const StateVec> no_def,
                                  std::span<const StateVec> def, std::span<const AgentId> normal_set) {
  DeviationReport r;
  r.normal_set.assign(normal_set.begin(), normal_set.end());
  r.delta_no_def = deviation(no_def, baseline);
  r.delta_def = deviation(def, baseline);
  r.avg_no_def = normal_avg_deviation(r.delta_no_def, normal_set);
  r.avg_def = normal_avg_deviation(r.delta_def, normal_set);
  r.improvement = improvement_pct(r.avg_no_def, r.avg_def);
  r.per_agent_improvement = per_agent_improvement_pct(r.delta_no_def, r.delta_def);
  return r;
}

}  // namespace safecons
