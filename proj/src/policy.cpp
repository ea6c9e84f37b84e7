#include "safecons/policy.hpp"

#include <cmath>

#include "safecons/llmgate.hpp"

namespace safecons {

namespace {

StateVec random_unit_vector(std::size_t dim, Stream& rng) {
  if (dim == 1) return StateVec{rng.uniform() < 0.5 ? -1.0 : 1.0};
  StateVec v(dim);
  double norm = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    norm = norm2(v);
  } while (norm < 1e-12);
  return v * (1.0 / norm);
}

}  // namespace

void PolicyInput::validate() const {
  if (own.empty()) throw Error(ErrorCode::kInvalidArgument, "policy input has an empty own state");
  if (!own.is_finite()) throw Error(ErrorCode::kInvalidArgument, "policy input own state is not finite");
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const auto& [id, state] = neighbors[k];
    if (state.dim() != own.dim())
      throw Error(ErrorCode::kInvalidArgument, "neighbor " + std::to_string(id) + " has mismatched dimension");
    if (!state.is_finite())
      throw Error(ErrorCode::kInvalidArgument, "neighbor " + std::to_string(id) + " state is not finite");
    if (k > 0 && neighbors[k - 1].first >= id)
      throw Error(ErrorCode::kInvalidArgument, "neighbor ids must be strictly ascending");
  }
}

void PolicyKind::validate() const {
  if (!std::isfinite(jitter_sd) || jitter_sd < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "jitter_sd must be finite and >= 0");
  if (!(self_weight >= 0.0 && self_weight <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "self_weight must lie in [0, 1]");
}

void HallucinationConfig::validate() const {
  if (!(p_h >= 0.0 && p_h <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "p_h must lie in [0, 1]");
  if (!std::isfinite(magnitude) || magnitude < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "hallucination magnitude must be finite and >= 0");
  if (!target.is_finite()) throw Error(ErrorCode::kInvalidArgument, "hallucination target is not finite");
}

std::string_view to_string(PolicyTag tag) {
  switch (tag) {
    case PolicyTag::kMeanAggregation: return "mean-aggregation";
    case PolicyTag::kLlmMimic: return "llm-mimic";
    case PolicyTag::kExternalLlm: return "external-llm";
  }
  return "?";
}

std::string_view to_string(HallucinationMode mode) {
  switch (mode) {
    case HallucinationMode::kUniformRandom: return "uniform-random";
    case HallucinationMode::kFixedTarget: return "fixed-target";
    case HallucinationMode::kLargeJump: return "large-jump";
  }
  return "?";
}

PolicyTag parse_policy_tag(std::string_view text) {
  for (auto tag : {PolicyTag::kMeanAggregation, PolicyTag::kLlmMimic, PolicyTag::kExternalLlm})
    if (to_string(tag) == text) return tag;
  throw Error(ErrorCode::kInvalidArgument, "unknown policy kind '" + std::string(text) + "'");
}

HallucinationMode parse_hallucination_mode(std::string_view text) {
  for (auto mode : {HallucinationMode::kUniformRandom, HallucinationMode::kFixedTarget,
                    HallucinationMode::kLargeJump})
    if (to_string(mode) == text) return mode;
  throw Error(ErrorCode::kInvalidArgument, "unknown hallucination mode '" + std::string(text) + "'");
}

StateVec evaluate_policy(const PolicyKind& kind, const PolicyInput& input, const Domain& domain,
                         Stream& rng, const llm::Gateway* gateway) {
  if (input.neighbors.empty()) return input.own;

  if (kind.tag == PolicyTag::kExternalLlm) {
    if (gateway == nullptr)
      throw Error(ErrorCode::kPolicyUnavailable, "external-llm policy has no gateway configured");
    return gateway->decide(input, domain);
  }

  StateVec mean(input.dim());
  for (const auto& [id, state] : input.neighbors) mean += state;
  mean *= 1.0 / static_cast<double>(input.neighbors.size());
  StateVec out = kind.self_weight * input.own + (1.0 - kind.self_weight) * mean;

  if (kind.tag == PolicyTag::kLlmMimic && kind.jitter_sd > 0.0) {
    for (double& x : out) x += kind.jitter_sd * rng.normal();
  }
  return domain.clamp(std::move(out));
}

PolicyOutcome hallucinate_wrap_traced(const PolicyKind& base, const HallucinationConfig& cfg,
                                      const PolicyInput& input, const Domain& domain, Stream& rng,
                                      const llm::Gateway* gateway) {
  Stream branch = rng.derive(Purpose::kHallucination);
  if (!(cfg.p_h > 0.0 && branch.uniform() < cfg.p_h)) {
    return {evaluate_policy(base, input, domain, rng, gateway), false};
  }

  switch (cfg.mode) {
    case HallucinationMode::kUniformRandom: {
      StateVec out(domain.dim());
      for (std::size_t k = 0; k < out.dim(); ++k)
        out[k] = branch.uniform(domain.lower()[k], domain.upper()[k]);
      return {domain.clamp(std::move(out)), true};
    }
    case HallucinationMode::kFixedTarget: {
      StateVec target = cfg.target.empty() ? domain.lower() : cfg.target;
      if (target.dim() == 1 && domain.dim() > 1) target = StateVec(domain.dim(), target[0]);
      return {domain.clamp(std::move(target)), true};
    }
    case HallucinationMode::kLargeJump: {
      StateVec out = evaluate_policy(base, input, domain, rng, gateway);
      out += cfg.magnitude * random_unit_vector(out.dim(), branch);
      return {domain.clamp(std::move(out)), true};
    }
  }
  return {input.own, false};
}

StateVec hallucinate_wrap(const PolicyKind& base, const HallucinationConfig& cfg, const PolicyInput& input,
                          const Domain& domain, Stream& rng, const llm::Gateway* gateway) {
  return hallucinate_wrap_traced(base, cfg, input, domain, rng, gateway).value;
}

PolicyFn make_agent_policy(PolicyKind kind, HallucinationConfig hallucination, Domain domain,
                           const llm::Gateway* gateway) {
  kind.validate();
  hallucination.validate();
  return [kind, hallucination, domain = std::move(domain), gateway](const PolicyInput& input, Stream& rng) {
    return hallucinate_wrap(kind, hallucination, input, domain, rng, gateway);
  };
}

}  // namespace safecons
