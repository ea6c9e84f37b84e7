#include "safecons/rng.hpp"

#include <cmath>
#include <numbers>

namespace safecons {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t Stream::next() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

Stream Stream::derive(std::uint64_t tag) const noexcept {
  return Stream(mix64(mix64(key_ ^ 0x5851F42D4C957F2DULL) + (tag + 1) * kGolden));
}

double Stream::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Stream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Stream SeedSpec::stream() const noexcept {
  return Stream(mix64(master_seed))
      .derive(round)
      .derive(agent)
      .derive(static_cast<std::uint64_t>(purpose))
      .derive(sample_index);
}

}  // namespace safecons
