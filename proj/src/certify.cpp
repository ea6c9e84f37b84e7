#include "safecons/certify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "safecons/smoothing.hpp"

namespace safecons {

namespace {

constexpr double kProbabilityClip = 1e-10;

// Acklam's rational approximation, lower half (p <= 0.5).
double quantile_initial(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double kLowBreak = 0.02425;

  if (p < kLowBreak) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile needs p in (0, 1)");
  if (p == 0.5) return 0.0;
  // 1 - p is exact for p >= 0.5, so reflect into the lower half.
  if (p > 0.5) return -std_normal_quantile(1.0 - p);

  double x = quantile_initial(p);
  // Halley refinement against the erfc-based CDF.
  for (int iter = 0; iter < 2; ++iter) {
    const double e = std_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

ProbabilityBounds clopper_pearson_bounds(std::size_t successes, std::size_t n, double alpha) {
  if (n == 0 || successes > n)
    throw Error(ErrorCode::kInvalidArgument, "Clopper-Pearson needs 0 <= successes <= n and n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  const double s = static_cast<double>(successes);
  const double nn = static_cast<double>(n);
  ProbabilityBounds out;
  out.lower = successes == 0 ? 0.0 : boost::math::ibeta_inv(s, nn - s + 1.0, alpha);
  out.upper = successes == n ? 1.0 : boost::math::ibetac_inv(s + 1.0, nn - s, alpha);
  return out;
}

RegionPartition::RegionPartition(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 3) throw Error(ErrorCode::kInvalidArgument, "a partition needs at least 2 regions");
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (!std::isfinite(boundaries_[i])) throw Error(ErrorCode::kInvalidArgument, "partition boundaries must be finite");
    if (i > 0 && !(boundaries_[i - 1] < boundaries_[i]))
      throw Error(ErrorCode::kInvalidArgument, "partition boundaries must be strictly increasing");
  }
}

RegionPartition RegionPartition::uniform(std::size_t k, double lo, double hi) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "a partition needs at least 2 regions");
  std::vector<double> b(k + 1);
  for (std::size_t i = 0; i <= k; ++i) b[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k);
  b.back() = hi;
  return RegionPartition(std::move(b));
}

std::size_t RegionPartition::region_of(double x) const {
  const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), x);
  if (it == boundaries_.begin()) return 0;
  const auto idx = static_cast<std::size_t>(it - boundaries_.begin()) - 1;
  return std::min(idx, regions() - 1);
}

std::optional<double> certified_radius(double pA_lower, double pB_upper, double sigma) {
  if (!(pA_lower >= 0.0 && pA_lower <= 1.0) || !(pB_upper >= 0.0 && pB_upper <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "probability bounds must lie in [0, 1]");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  if (pA_lower <= pB_upper) return std::nullopt;
  const double a = std::clamp(pA_lower, kProbabilityClip, 1.0 - kProbabilityClip);
  const double b = std::clamp(pB_upper, kProbabilityClip, 1.0 - kProbabilityClip);
  return 0.5 * sigma * (std_normal_quantile(a) - std_normal_quantile(b));
}

Certificate certify_decision(const PolicyFn& policy, const PolicyInput& input, const RegionPartition& partition,
                             double sigma, std::size_t n, double alpha, const Domain& domain, const Stream& rng) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "certification needs n >= 2 samples");
  if (domain.dim() != 1) throw Error(ErrorCode::kInvalidArgument, "certification partitions are one-dimensional");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");

  const SampleBatch batch = sample_policy(policy, input, sigma, n, domain, rng);
  Certificate cert;
  cert.counts.assign(partition.regions(), 0);
  for (const auto& y : batch.outputs) ++cert.counts[partition.region_of(y[0])];
  cert.n_samples = batch.outputs.size();
  cert.confidence = 1.0 - alpha;

  // max_element returns the first maximum, i.e. the lowest region index.
  cert.region = static_cast<std::size_t>(std::max_element(cert.counts.begin(), cert.counts.end()) - cert.counts.begin());
  std::size_t best_other = cert.region == 0 ? 1 : 0;
  for (std::size_t r = 0; r < cert.counts.size(); ++r) {
    if (r != cert.region && cert.counts[r] > cert.counts[best_other]) best_other = r;
  }
  cert.runner_up = best_other;

  cert.pA_lower = clopper_pearson_bounds(cert.counts[cert.region], cert.n_samples, alpha).lower;
  const double runner_upper = clopper_pearson_bounds(cert.counts[cert.runner_up], cert.n_samples, alpha).upper;
  cert.pB_upper = std::min(1.0 - cert.pA_lower, runner_upper);
  cert.radius = certified_radius(cert.pA_lower, cert.pB_upper, sigma);
  return cert;
}

double attenuation_factor(double radius, double sigma) {
  if (!(radius >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "radius must be >= 0");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  // 1 - Psi(z) = Psi(-z), computed without cancellation.
  return std_normal_cdf(-radius / sigma);
}

double path_attenuation(double delta0, std::span<const double> radii, double sigma) {
  if (!(delta0 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta0 must be >= 0");
  double out = delta0;
  for (double r : radii) out *= attenuation_factor(r, sigma);
  return out;
}

double tolerance_index(double r_min, double delta_mal_max) {
  if (!(delta_mal_max > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta_mal_max must be > 0");
  return r_min / delta_mal_max;
}

}  // namespace safecons
