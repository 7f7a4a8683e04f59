#pragma once

#include <cstdint>
#include <random>

namespace qkd::rng {

// splitmix64 finalizer; used for counter-based stream derivation.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Per-batch seed: batch i of run seed s gets splitmix64(s + (i+1)*GOLDEN).
// Counter-based, so streams never alias for distinct batch indices.
inline uint64_t batch_seed(uint64_t run_seed, uint64_t batch_index) {
    return splitmix64(run_seed + (batch_index + 1) * 0x9E3779B97F4A7C15ULL);
}

// Deterministic uniform stream. The 53-bit double construction is fixed here
// instead of std::uniform_real_distribution so results are stable across
// standard-library implementations.
class Stream {
  public:
    explicit Stream(uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double angle() { return uniform() * 6.283185307179586476925286766559; }
    bool bernoulli(double p) { return uniform() < p; }
    uint8_t bit() { return static_cast<uint8_t>(engine_() >> 63); }

  private:
    std::mt19937_64 engine_;
};

}  // namespace qkd::rng
