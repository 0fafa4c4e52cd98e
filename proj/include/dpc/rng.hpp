#pragma once

#include <cstdint>
#include <random>

namespace dpc {

// Seeded generator producing identical sequences for identical seeds.
// Doubles are derived from raw 64-bit draws so the output does not depend on
// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  std::uint64_t raw() { return gen_(); }

  // Independent child stream derived from (seed, stream id).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix(seed + 0x9e3779b97f4a7c15ull * (stream_id + 1)));
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace dpc
