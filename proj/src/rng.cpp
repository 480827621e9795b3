#include "bcv/rng.hpp"

namespace bcv {

namespace {
constexpr std::uint64_t kPcgMultiplier = 6364136223846793005ULL;
}

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept
    : inc_((stream << 1u) | 1u)
{
    next();
    state_ += seed;
    next();
}

std::uint32_t Pcg32::next() noexcept
{
    const std::uint64_t old = state_;
    state_ = old * kPcgMultiplier + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

std::uint32_t Pcg32::below(std::uint32_t bound) noexcept
{
    const std::uint32_t threshold = (0u - bound) % bound;
    for (;;) {
        const std::uint32_t r = next();
        if (r >= threshold)
            return r % bound;
    }
}

double Pcg32::uniform01() noexcept
{
    const std::uint64_t hi = next() >> 5;  // 27 bits
    const std::uint64_t lo = next() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t parent, std::span<const std::uint64_t> words) noexcept
{
    // Words use a different increment than the parent so (s, {f}) and
    // (f, {s}) map to different seeds.
    constexpr std::uint64_t word_gamma = 0xD1B54A32D192ED03ULL;
    std::uint64_t h = mix64(parent + kGoldenGamma);
    for (std::uint64_t w : words)
        h = mix64(h ^ mix64(w + word_gamma));
    return h;
}

}  // namespace bcv
