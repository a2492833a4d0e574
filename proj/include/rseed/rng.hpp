#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rseed {

// Deterministic RNG. std::mt19937 output is fully specified by the standard;
// the uniform/normal conversions below avoid std::*_distribution, whose
// sequences differ between standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
        gen_.seed(seq);
    }

    // uniform in [0, 1)
    float uniform() { return static_cast<float>(gen_() >> 8) * (1.0f / 16777216.0f); }

    // standard normal via Box-Muller
    float normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so log() stays finite
        double u1 = (static_cast<double>(gen_() >> 8) + 1.0) * (1.0 / 16777216.0);
        double u2 = static_cast<double>(gen_() >> 8) * (1.0 / 16777216.0);
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = static_cast<float>(r * std::sin(a));
        have_spare_ = true;
        return static_cast<float>(r * std::cos(a));
    }

    uint32_t next_u32() { return gen_(); }

private:
    std::mt19937 gen_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

// Derives independent stream seeds from one master seed (splitmix64 step).
inline uint64_t derive_seed(uint64_t master, uint64_t tag) {
    uint64_t z = master + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace rseed
