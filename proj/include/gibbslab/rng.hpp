#pragma once

// Seeded, splittable random streams. All draws go through RandomStream so
// that results are bit-identical for a fixed (seed, stream-id) regardless of
// platform or worker count; std::uniform_real_distribution and friends are
// implementation-defined and deliberately avoided.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace gibbslab {

// splitmix64: mixes a 64-bit state into a well-distributed output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a master seed and a small tuple of indices.
// Used to hand independent streams to chains, rungs and repetitions.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = master;
  std::uint64_t x = splitmix64(s);
  s ^= purpose * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL;
  x ^= splitmix64(s);
  s ^= (a + 1) * 0xd1b54a32d192ed03ULL;
  x ^= splitmix64(s);
  s ^= (b + 1) * 0xeb44accab455d165ULL;
  x ^= splitmix64(s);
  return x;
}

// Stable stream ids for the documented seed-splitting rule.
enum class StreamId : std::uint64_t {
  BaseSampling = 1,
  Chain = 2,
  ThermoRung = 3,
  Recovery = 4,
  MarginalSubsets = 5,
  Scratch = 6,
};

inline std::uint64_t derive_seed(std::uint64_t master, StreamId id,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(id), a, b);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift; bias is < 2^-64 * n, irrelevant at lab scale.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  // Marsaglia polar method (deterministic given the stream).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    have_spare_ = true;
    return u * factor;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gibbslab
