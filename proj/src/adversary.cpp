#include "safecons/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace safecons {

namespace {

StateVec bias_direction(const AttackConfig& cfg, std::size_t dim) {
  if (!cfg.direction.empty()) return cfg.direction * (1.0 / norm2(cfg.direction));
  return StateVec(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
}

// Uniform in the closed L2 ball of radius r; U[-r, r] for d = 1.
StateVec uniform_in_ball(std::size_t dim, double r, Stream& rng) {
  if (dim == 1) return StateVec{rng.uniform(-r, r)};
  StateVec v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = norm2(v);
  } while (n < 1e-12);
  const double radius = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return v * (radius / n);
}

}  // namespace

std::string_view to_string(AttackStrategy s) {
  switch (s) {
    case AttackStrategy::kConstantBias: return "constant-bias";
    case AttackStrategy::kUniformBounded: return "uniform-bounded";
    case AttackStrategy::kOscillating: return "oscillating";
  }
  return "?";
}

AttackStrategy parse_attack_strategy(std::string_view text) {
  for (auto s : {AttackStrategy::kConstantBias, AttackStrategy::kUniformBounded, AttackStrategy::kOscillating})
    if (to_string(s) == text) return s;
  throw Error(ErrorCode::kInvalidArgument, "unknown attack strategy '" + std::string(text) + "'");
}

bool AttackConfig::is_malicious(AgentId k) const {
  return std::binary_search(malicious.begin(), malicious.end(), k);
}

double AttackConfig::probability(std::size_t round) const {
  return schedule ? std::clamp(schedule(round), 0.0, 1.0) : p_attack;
}

void AttackConfig::validate(std::size_t n, std::size_t dim) {
  std::sort(malicious.begin(), malicious.end());
  if (std::adjacent_find(malicious.begin(), malicious.end()) != malicious.end())
    throw Error(ErrorCode::kInvalidArgument, "malicious set contains duplicates");
  if (!malicious.empty() && malicious.back() >= n)
    throw Error(ErrorCode::kInvalidAgent, "malicious agent " + std::to_string(malicious.back()) + " out of range");
  if (!(p_attack >= 0.0 && p_attack <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "p_attack must lie in [0, 1]");
  if (!std::isfinite(delta_max) || !(delta_max > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "delta_max must be finite and > 0");
  if (bias_sign != 1 && bias_sign != -1) throw Error(ErrorCode::kInvalidArgument, "bias_sign must be +1 or -1");
  if (period == 0) throw Error(ErrorCode::kInvalidArgument, "period must be >= 1");
  if (!direction.empty()) {
    if (direction.dim() != dim) throw Error(ErrorCode::kInvalidArgument, "attack direction dimension mismatch");
    if (!direction.is_finite() || norm2(direction) <= 0.0)
      throw Error(ErrorCode::kInvalidArgument, "attack direction must be a finite nonzero vector");
  }
}

Transmission transmit_traced(const AttackConfig& cfg, AgentId k, const StateVec& true_state, std::size_t round,
                             const Domain& domain, Stream rng) {
  if (!cfg.is_malicious(k)) return {true_state, false};
  const double p = cfg.probability(round);
  if (!(p > 0.0 && rng.uniform() < p)) return {true_state, false};

  const std::size_t dim = true_state.dim();
  StateVec offset;
  switch (cfg.strategy) {
    case AttackStrategy::kConstantBias:
      offset = (cfg.bias_sign * cfg.delta_max) * bias_direction(cfg, dim);
      break;
    case AttackStrategy::kUniformBounded:
      offset = uniform_in_ball(dim, cfg.delta_max, rng);
      break;
    case AttackStrategy::kOscillating: {
      const double phase = std::sin(2.0 * std::numbers::pi * static_cast<double>(round) /
                                    static_cast<double>(cfg.period));
      // sin at integer multiples of pi is not exactly 0 in floating point.
      const double sign = std::abs(phase) < 1e-12 ? 0.0 : (phase > 0.0 ? 1.0 : -1.0);
      offset = (sign * cfg.delta_max) * bias_direction(cfg, dim);
      break;
    }
  }
  return {domain.clamp(true_state + offset), true};
}

StateVec transmit(const AttackConfig& cfg, AgentId k, const StateVec& true_state, std::size_t round,
                  const Domain& domain, Stream rng) {
  return transmit_traced(cfg, k, true_state, round, domain, rng).value;
}

}  // namespace safecons
