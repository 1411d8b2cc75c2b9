#include "cohsim/random.hpp"

#include <cmath>

namespace cohsim {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kIndexSalt = 0x632BE59BD9B4E019ULL;

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t key) noexcept
{
    std::uint64_t x = key;
    for (auto& word : state_) {
        x += kGoldenGamma;
        word = mix64(x);
    }
}

RandomStream::result_type RandomStream::operator()() noexcept
{
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

double RandomStream::uniform() noexcept
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() noexcept
{
    for (;;) {
        const double u = 2.0 * uniform() - 1.0;
        const double v = 2.0 * uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0)
            return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

RandomStream derive_emitter_rng(std::uint64_t master_seed, std::uint64_t emitter_index) noexcept
{
    return RandomStream(mix64(master_seed ^ mix64(emitter_index + kIndexSalt)));
}

}  // namespace cohsim
