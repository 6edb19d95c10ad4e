#pragma once

#include <cstdint>
#include <string_view>

namespace shield {

/// SplitMix64 stream. Identical seeds give identical sequences on every
/// platform; a Prng is single-owner, parallel work uses child() streams.
class Prng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    explicit constexpr Prng(std::uint64_t seed = 0) : state_(seed) {}

    /// Independent stream for (seed, tag), unaffected by draws on any other stream.
    [[nodiscard]] static Prng child(std::uint64_t seed, std::uint64_t tag)
    {
        return Prng(derive_seed(seed, tag));
    }

    [[nodiscard]] static constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag)
    {
        return mix(seed ^ ((tag + 1) * kGolden));
    }

    /// SplitMix64 finalizer.
    [[nodiscard]] static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t next_u64()
    {
        state_ += kGolden;
        return mix(state_);
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    constexpr double next_unit()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Box-Muller, cosine branch only: always consumes exactly two unit draws.
    double next_gaussian(double mu, double sigma);

    /// Uniform integer in [0, n) by floor-scaling one unit draw.
    std::uint64_t next_below(std::uint64_t n)
    {
        return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
    }

    /// Uniform real in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    [[nodiscard]] constexpr std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Parses a 64-bit seed written in decimal or with a 0x hex prefix.
std::uint64_t parse_seed(std::string_view text);

} // namespace shield
