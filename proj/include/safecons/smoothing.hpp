#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/policy.hpp"
#include "safecons/rng.hpp"

namespace safecons {

struct SmoothingConfig {
  double sigma = 0.05;     // input noise sd, state units
  std::size_t m1 = 5;      // stage-1 probe size
  double c = 10.0;         // stage-2 scaling
  double tau = 0.01;       // variance threshold
  std::size_t m_max = 20;  // stage-2 cap
  double trim_frac = 0.1;  // removed from each tail

  void validate() const;
  friend bool operator==(const SmoothingConfig&, const SmoothingConfig&) = default;
};

struct SampleBatch {
  std::vector<StateVec> outputs;
  int stage = 1;
  std::size_t requested = 0;
  std::size_t failed = 0;  // external-llm samples that could not be obtained
};

/// Component-wise trimmed mean: drop floor(trim_frac * m) lowest and highest
/// values per component, average the rest.
StateVec trim_mean(std::span<const StateVec> samples, double trim_frac);

/// m evaluations of `policy` at input + eps_k, eps_k ~ N(0, sigma^2 I) over
/// the full input vector, perturbed inputs clamped to `domain`. Sample k uses
/// stream rng.derive(first_index + k). A policy-unavailable sample is
/// dropped; if any are dropped and fewer than max(2, m/2) remain, throws
/// sampling-failed.
SampleBatch sample_policy(const PolicyFn& policy, const PolicyInput& input, double sigma, std::size_t m,
                          const Domain& domain, const Stream& rng, int stage = 1,
                          std::size_t first_index = 0);

/// (1/m) * sum ||y_k - mean(y)||^2, the biased probe variance.
double estimate_variance(std::span<const StateVec> samples);
double estimate_variance(const SampleBatch& batch);

/// min(ceil(c * V / tau), m_max); 0 when V = 0.
std::size_t adaptive_sample_count(double variance, const SmoothingConfig& cfg);

struct SmoothedDecision {
  StateVec value;
  std::size_t stage1_samples = 0;
  std::size_t stage2_samples = 0;
  double variance = 0.0;

  std::size_t queries() const noexcept { return stage1_samples + stage2_samples; }
};

/// Two-stage adaptive randomized smoothing of a single decision.
SmoothedDecision smoothed_decision_traced(const PolicyFn& policy, const PolicyInput& input,
                                          const SmoothingConfig& cfg, const Domain& domain, const Stream& rng);

StateVec smoothed_decision(const PolicyFn& policy, const PolicyInput& input, const SmoothingConfig& cfg,
                           const Domain& domain, const Stream& rng);

/// Level-1 verification: the neighbor's state as its own smoothed decision
/// on its own input.
StateVec verified_neighbor_state(const PolicyFn& neighbor_policy, const PolicyInput& neighbor_input,
                                 const SmoothingConfig& cfg, const Domain& domain, const Stream& rng);

}  // namespace safecons
