#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace cohsim {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** seeded from a SplitMix64 sequence.
///
/// All draws are built from integer operations plus std::log/std::sqrt, so
/// streams are identical wherever those are correctly rounded. Satisfies
/// UniformRandomBitGenerator.
class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t key) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    /// Uniform on (0, 1].
    double uniform_open_zero() noexcept { return 1.0 - uniform(); }
    /// Standard normal via the Marsaglia polar method; no cached spare.
    double normal() noexcept;

private:
    std::array<std::uint64_t, 4> state_;
};

/// Independent stream for one emitter of a superposition.
///
/// key = mix64(master_seed ^ mix64(emitter_index + 0x632BE59BD9B4E019)),
/// which then seeds RandomStream through four SplitMix64 steps.
RandomStream derive_emitter_rng(std::uint64_t master_seed, std::uint64_t emitter_index) noexcept;

}  // namespace cohsim
