#pragma once

#include <cstdint>
#include <span>

namespace avar {

// splitmix64: fixed generator so runs are reproducible across platforms.
// std::mt19937 + distributions are implementation-defined and would break
// the bit-exact determinism contract.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Index sampled from unnormalized nonnegative weights.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = uniform() * total;
        double cum = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            cum += weights[i];
            if (r < cum) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    // Decorrelated stream for (seed, index) pairs, e.g. per-trajectory seeds.
    static Rng derive(uint64_t seed, uint64_t stream) {
        Rng mix(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
        return Rng(mix.next_u64());
    }

    // Scalar form of derive for APIs that take a seed.
    static uint64_t mix_seed(uint64_t seed, uint64_t stream) {
        return derive(seed, stream).next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace avar
