#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/policy.hpp"
#include "safecons/rng.hpp"

namespace safecons {

/// Psi, the standard normal CDF.
double std_normal_cdf(double x);

/// Psi^{-1}(p) for p in (0, 1); absolute error below 1e-9 on [1e-10, 1-1e-10].
double std_normal_quantile(double p);

struct ProbabilityBounds {
  double lower = 0.0;
  double upper = 1.0;
};

/// One-sided exact (Clopper-Pearson) bounds at significance alpha:
/// lower solves P(X >= s | p) = alpha, upper solves P(X <= s | p) = alpha.
ProbabilityBounds clopper_pearson_bounds(std::size_t successes, std::size_t n, double alpha);

/// Contiguous regions R_0..R_{k-1} over a 1-D domain. `boundaries` holds
/// k+1 strictly increasing edges from domain lower to domain upper.
class RegionPartition {
 public:
  explicit RegionPartition(std::vector<double> boundaries);

  static RegionPartition uniform(std::size_t k, double lo = 0.0, double hi = 1.0);

  std::size_t regions() const noexcept { return boundaries_.size() - 1; }
  const std::vector<double>& boundaries() const noexcept { return boundaries_; }

  /// Half-open [b_i, b_{i+1}); the last region also holds its upper edge.
  /// Values outside the cover fall into the nearest end region.
  std::size_t region_of(double x) const;

 private:
  std::vector<double> boundaries_;
};

/// r = sigma/2 * (Psi^{-1}(pA_lower) - Psi^{-1}(pB_upper)), bounds clipped to
/// [1e-10, 1-1e-10]. nullopt (abstain) when pA_lower <= pB_upper.
std::optional<double> certified_radius(double pA_lower, double pB_upper, double sigma);

struct Certificate {
  std::size_t region = 0;      // R_A
  std::size_t runner_up = 0;   // R_B
  std::vector<std::size_t> counts;
  double pA_lower = 0.0;
  double pB_upper = 1.0;
  std::optional<double> radius;  // nullopt = ABSTAIN
  double confidence = 0.0;       // 1 - alpha
  std::size_t n_samples = 0;

  bool abstain() const noexcept { return !radius.has_value(); }
};

/// Monte Carlo certificate of the decision region of `policy` at `input`
/// under N(0, sigma^2 I) input noise. Ties for R_A go to the lower index.
Certificate certify_decision(const PolicyFn& policy, const PolicyInput& input, const RegionPartition& partition,
                             double sigma, std::size_t n, double alpha, const Domain& domain, const Stream& rng);

/// 1 - Psi(r / sigma), the modeled per-hop shrinkage of a perturbation.
double attenuation_factor(double radius, double sigma);

/// delta0 * prod_i (1 - Psi(r_i / sigma)) along a propagation path.
double path_attenuation(double delta0, std::span<const double> radii, double sigma);

/// r_min / delta_mal_max; a comparative index, not a tolerable fraction.
double tolerance_index(double r_min, double delta_mal_max);

}  // namespace safecons
