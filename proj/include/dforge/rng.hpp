#pragma once

#include <cstdint>

namespace dforge {

// Counter-based generator: the n-th output of stream (seed, stream) is
// splitmix64_mix(key + (n + 1) * 0x9E3779B97F4A7C15) with
// key = splitmix64_mix(seed ^ splitmix64_mix(stream + 0xD1B54A32D192ED03)).
// Streams are addressable without state sharing, so work can be split
// across threads by stream index with bit-identical results.
class CounterRng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-counter";

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  // Standard normal via the Box-Muller transform (pairs are cached).
  double normal();
  std::uint64_t counter() const { return ctr_; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dforge
