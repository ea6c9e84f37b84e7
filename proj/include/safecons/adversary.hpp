#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/rng.hpp"

namespace safecons {

enum class AttackStrategy { kConstantBias, kUniformBounded, kOscillating };

std::string_view to_string(AttackStrategy s);
AttackStrategy parse_attack_strategy(std::string_view text);

struct AttackConfig {
  std::vector<AgentId> malicious;  // sorted, unique
  double p_attack = 0.0;
  double delta_max = 0.3;
  AttackStrategy strategy = AttackStrategy::kConstantBias;
  int bias_sign = 1;
  std::size_t period = 10;  // oscillating
  StateVec direction;       // unit bias direction for d > 1; empty = (1,..,1)/sqrt(d)
  /// Optional per-round attack probability; overrides p_attack when set.
  std::function<double(std::size_t round)> schedule;

  bool is_malicious(AgentId k) const;
  double probability(std::size_t round) const;
  /// Sorts malicious ids and checks them against `n` agents of dimension `dim`.
  void validate(std::size_t n, std::size_t dim);
};

struct Transmission {
  StateVec value;
  bool fired = false;
};

/// What agent k reports at `round` given its true state: unchanged for
/// honest agents, otherwise the manipulated value with probability p_k(t).
/// The result is clamped, so ||report - true|| <= delta_max always holds.
Transmission transmit_traced(const AttackConfig& cfg, AgentId k, const StateVec& true_state, std::size_t round,
                             const Domain& domain, Stream rng);

StateVec transmit(const AttackConfig& cfg, AgentId k, const StateVec& true_state, std::size_t round,
                  const Domain& domain, Stream rng);

}  // namespace safecons
