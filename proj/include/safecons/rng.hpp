#pragma once

#include <cstdint>
#include <limits>

namespace safecons {

/// Stream purposes used in derivation paths. Values are part of the
/// reproducibility contract; do not renumber.
enum class Purpose : std::uint64_t {
  kInitialState = 1,
  kTransmit = 2,
  kPolicy = 3,
  kDecision = 4,
  kVerify = 5,
  kCertify = 6,
  kHallucination = 7,
  kSample = 8,
};

/// Counter-based pseudo-random stream (SplitMix64 keyed by a derivation
/// path). Streams are cheap values; derive children instead of sharing one
/// mutably across threads.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  /// Child stream keyed by (this key, tag). Does not advance this stream.
  Stream derive(std::uint64_t tag) const noexcept;
  Stream derive(Purpose p) const noexcept { return derive(static_cast<std::uint64_t>(p)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, both variates used).
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Reproducibility path (master_seed, round, agent, purpose, sample-index).
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t round = 0;
  std::uint64_t agent = 0;
  Purpose purpose = Purpose::kPolicy;
  std::uint64_t sample_index = 0;

  Stream stream() const noexcept;
};

}  // namespace safecons
