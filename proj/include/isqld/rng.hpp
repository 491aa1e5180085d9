#pragma once

#include <cstdint>
#include <random>

namespace isqld {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream identifiers so that arrivals and services never share draws.
enum class Stream : std::uint64_t { kArrivals = 1, kServices = 2, kAux = 3 };

/// Seed for replication `index` of a run keyed by `seed`, on stream `stream`.
/// Replications are order independent: any index can be generated alone.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index,
                                    Stream stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^
                    static_cast<std::uint64_t>(stream));
}

/// 64-bit Mersenne twister with an explicit, reproducible open-interval
/// uniform draw (independent of the standard library's distribution code).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace isqld
