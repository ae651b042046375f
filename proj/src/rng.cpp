#include "dforge/rng.hpp"

#include <cmath>
#include <numbers>

namespace dforge {

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64_mix(seed ^ splitmix64_mix(index + 0xD1B54A32D192ED03ULL));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_seed(seed, stream)) {}

std::uint64_t CounterRng::next_u64() {
  ++ctr_;
  return splitmix64_mix(key_ + ctr_ * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

}  // namespace dforge
