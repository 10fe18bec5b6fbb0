#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace evloc::core {

/// Splittable deterministic generator. All randomness in the toolkit flows
/// from one root seed: substreams are derived with derive(root, label[, index])
/// so every module seed is reproducible and documentable. The core generator
/// is SplitMix64 (counter-based, 64-bit state), distributions are hand-rolled
/// so outputs do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is < 2^-64 per draw.
        unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; draws two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // Avoid log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Derive a child seed from (seed, label, index). FNV-1a over the label,
    /// then SplitMix64 finalization mixes in the index.
    static std::uint64_t derive(std::uint64_t seed, std::string_view label,
                                std::uint64_t index = 0) {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        Rng mix(seed ^ h);
        mix.state_ += index * 0x9E3779B97F4A7C15ull;
        return mix.next_u64();
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace evloc::core
