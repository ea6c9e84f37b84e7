#include "safecons/smoothing.hpp"

#include <algorithm>
#include <cmath>

namespace safecons {

void SmoothingConfig::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0) throw Error(ErrorCode::kInvalidArgument, "sigma must be finite and >= 0");
  if (m1 < 2) throw Error(ErrorCode::kInvalidArgument, "m1 must be >= 2");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::kInvalidArgument, "c must be > 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::kInvalidArgument, "tau must be > 0");
  if (!(trim_frac >= 0.0 && trim_frac < 0.5))
    throw Error(ErrorCode::kInvalidArgument, "trim_frac must lie in [0, 0.5)");
}

StateVec trim_mean(std::span<const StateVec> samples, double trim_frac) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "trim_mean of an empty sample set");
  if (!(trim_frac >= 0.0 && trim_frac < 1.0)) throw Error(ErrorCode::kInvalidArgument, "trim_frac must lie in [0, 1)");
  const std::size_t m = samples.size();
  const auto cut = static_cast<std::size_t>(std::floor(trim_frac * static_cast<double>(m)));
  if (2 * cut >= m)
    throw Error(ErrorCode::kInvalidArgument, "trim_frac removes every sample (m=" + std::to_string(m) + ")");

  const std::size_t dim = samples.front().dim();
  StateVec out(dim);
  std::vector<double> column(m);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t s = 0; s < m; ++s) {
      if (samples[s].dim() != dim) throw Error(ErrorCode::kInvalidArgument, "samples differ in dimension");
      column[s] = samples[s][k];
    }
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t s = cut; s < m - cut; ++s) sum += column[s];
    out[k] = sum / static_cast<double>(m - 2 * cut);
  }
  return out;
}

SampleBatch sample_policy(const PolicyFn& policy, const PolicyInput& input, double sigma, std::size_t m,
                          const Domain& domain, const Stream& rng, int stage, std::size_t first_index) {
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  SampleBatch batch;
  batch.stage = stage;
  batch.requested = m;
  batch.outputs.reserve(m);

  for (std::size_t k = 0; k < m; ++k) {
    Stream sample = rng.derive(first_index + k);
    PolicyInput perturbed = input;
    if (sigma > 0.0) {
      for (double& x : perturbed.own) x += sigma * sample.normal();
      for (auto& [id, state] : perturbed.neighbors)
        for (double& x : state) x += sigma * sample.normal();
    }
    perturbed.own = domain.clamp(std::move(perturbed.own));
    for (auto& [id, state] : perturbed.neighbors) state = domain.clamp(std::move(state));

    try {
      batch.outputs.push_back(policy(perturbed, sample));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kPolicyUnavailable) throw;
      ++batch.failed;
    }
  }

  if (batch.failed > 0) {
    const std::size_t floor_count = std::max<std::size_t>(2, m / 2);
    if (batch.outputs.size() < floor_count)
      throw Error(ErrorCode::kSamplingFailed, std::to_string(batch.failed) + " of " + std::to_string(m) +
                                                  " samples failed; batch below the retention floor");
  }
  return batch;
}

double estimate_variance(std::span<const StateVec> samples) {
  if (samples.size() < 2) throw Error(ErrorCode::kInvalidArgument, "variance needs at least 2 samples");
  // Shifted by the first sample so identical samples give exactly 0.
  const StateVec& origin = samples.front();
  StateVec mean(origin.dim());
  for (const auto& s : samples) mean += s - origin;
  mean *= 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (const auto& s : samples) total += squared_norm(s - origin - mean);
  return total / static_cast<double>(samples.size());
}

double estimate_variance(const SampleBatch& batch) { return estimate_variance(batch.outputs); }

std::size_t adaptive_sample_count(double variance, const SmoothingConfig& cfg) {
  if (!(variance >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "variance must be >= 0");
  if (variance == 0.0) return 0;
  const double wanted = std::ceil(cfg.c * variance / cfg.tau);
  if (wanted >= static_cast<double>(cfg.m_max)) return cfg.m_max;
  return static_cast<std::size_t>(wanted);
}

SmoothedDecision smoothed_decision_traced(const PolicyFn& policy, const PolicyInput& input,
                                          const SmoothingConfig& cfg, const Domain& domain, const Stream& rng) {
  cfg.validate();
  SmoothedDecision result;
  SampleBatch probe = sample_policy(policy, input, cfg.sigma, cfg.m1, domain, rng, 1, 0);
  result.stage1_samples = cfg.m1;
  result.variance = estimate_variance(probe);

  const std::size_t m2 = adaptive_sample_count(result.variance, cfg);
  std::vector<StateVec> all = std::move(probe.outputs);
  if (m2 > 0) {
    SampleBatch topup = sample_policy(policy, input, cfg.sigma, m2, domain, rng, 2, cfg.m1);
    all.insert(all.end(), std::make_move_iterator(topup.outputs.begin()),
               std::make_move_iterator(topup.outputs.end()));
  }
  result.stage2_samples = m2;
  result.value = domain.clamp(trim_mean(all, cfg.trim_frac));
  return result;
}

StateVec smoothed_decision(const PolicyFn& policy, const PolicyInput& input, const SmoothingConfig& cfg,
                           const Domain& domain, const Stream& rng) {
  return smoothed_decision_traced(policy, input, cfg, domain, rng).value;
}

StateVec verified_neighbor_state(const PolicyFn& neighbor_policy, const PolicyInput& neighbor_input,
                                 const SmoothingConfig& cfg, const Domain& domain, const Stream& rng) {
  return smoothed_decision(neighbor_policy, neighbor_input, cfg, domain, rng);
}

}  // namespace safecons
