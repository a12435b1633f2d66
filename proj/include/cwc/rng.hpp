#pragma once

#include <cmath>
#include <cstdint>

namespace cwc {

// xoshiro256** by Blackman & Vigna, seeded through splitmix64. Used instead
// of <random> engines+distributions because distribution output is
// implementation-defined; every value here is reproducible from the seed on
// any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Unbiased bounded draw (rejection sampling on the top bits).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = -n % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // [0,1) with 53 random bits.
    double unit_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // [0,1) with 24 random bits.
    float unit_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    // [-r, r)
    double symmetric(double r) { return (2.0 * unit_double() - 1.0) * r; }

    // Box-Muller; consumes two draws per pair, caches the second.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v;
        do {
            u = unit_double();
        } while (u <= 0.0);
        v = unit_double();
        const double m = std::sqrt(-2.0 * std::log(u));
        spare_ = m * std::sin(2.0 * M_PI * v);
        has_spare_ = true;
        return m * std::cos(2.0 * M_PI * v);
    }

    // Independent deterministic substream, e.g. one per tensor or restart.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        return splitmix64(x);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cwc
