#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/rng.hpp"

namespace safecons {

namespace llm {
class Gateway;
}

/// z_i: the agent's own state followed by its neighbors' (reported or
/// verified) states, neighbors in ascending id order.
struct PolicyInput {
  StateVec own;
  std::vector<std::pair<AgentId, StateVec>> neighbors;

  std::size_t dim() const noexcept { return own.dim(); }
  /// Throws invalid-argument on dimension mismatch, non-finite entries or
  /// unordered neighbor ids.
  void validate() const;
};

enum class PolicyTag { kMeanAggregation, kLlmMimic, kExternalLlm };

struct PolicyKind {
  PolicyTag tag = PolicyTag::kLlmMimic;
  double jitter_sd = 0.05;  // llm-mimic only
  double self_weight = 0.5;

  void validate() const;
  friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

enum class HallucinationMode { kUniformRandom, kFixedTarget, kLargeJump };

struct HallucinationConfig {
  double p_h = 0.0;
  HallucinationMode mode = HallucinationMode::kUniformRandom;
  double magnitude = 0.0;  // large-jump displacement
  StateVec target;         // fixed-target value; empty means the domain's lower corner

  void validate() const;
  friend bool operator==(const HallucinationConfig&, const HallucinationConfig&) = default;
};

std::string_view to_string(PolicyTag tag);
std::string_view to_string(HallucinationMode mode);
PolicyTag parse_policy_tag(std::string_view text);
HallucinationMode parse_hallucination_mode(std::string_view text);

/// Phi_i. mean-aggregation: w*own + (1-w)*mean(neighbors); llm-mimic adds
/// N(0, jitter_sd^2) per component; external-llm asks the gateway. Output
/// is clamped to the domain. An isolated agent keeps its own state.
StateVec evaluate_policy(const PolicyKind& kind, const PolicyInput& input, const Domain& domain,
                         Stream& rng, const llm::Gateway* gateway = nullptr);

struct PolicyOutcome {
  StateVec value;
  bool hallucinated = false;
};

/// With probability p_h the output is replaced by the hallucination mode's
/// output. The branch draw comes from a derived child of `rng`, so p_h = 0
/// consumes `rng` exactly like evaluate_policy.
PolicyOutcome hallucinate_wrap_traced(const PolicyKind& base, const HallucinationConfig& cfg,
                                      const PolicyInput& input, const Domain& domain, Stream& rng,
                                      const llm::Gateway* gateway = nullptr);

StateVec hallucinate_wrap(const PolicyKind& base, const HallucinationConfig& cfg,
                          const PolicyInput& input, const Domain& domain, Stream& rng,
                          const llm::Gateway* gateway = nullptr);

/// Type-erased decision function used by smoothing and certification.
using PolicyFn = std::function<StateVec(const PolicyInput&, Stream&)>;

PolicyFn make_agent_policy(PolicyKind kind, HallucinationConfig hallucination, Domain domain,
                           const llm::Gateway* gateway = nullptr);

}  // namespace safecons
