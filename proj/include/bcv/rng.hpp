#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace bcv {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Steele/Lea/Flood SplitMix64. Used to derive seeds and draw seed lists.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept
    {
        state_ += kGoldenGamma;
        return mix64(state_);
    }

    constexpr std::uint64_t operator()() noexcept { return next(); }
    static constexpr std::uint64_t min() noexcept { return 0; }
    static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

private:
    std::uint64_t state_;
};

/// PCG-XSH-RR 64/32 (O'Neill). All sampling draws in the library come from
/// this generator so results do not depend on the standard library vendor.
class Pcg32 {
public:
    using result_type = std::uint32_t;

    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint32_t next() noexcept;
    std::uint32_t operator()() noexcept { return next(); }
    static constexpr std::uint32_t min() noexcept { return 0; }
    static constexpr std::uint32_t max() noexcept { return ~std::uint32_t{0}; }

    /// Uniform integer in [0, bound); bound must be > 0.
    std::uint32_t below(std::uint32_t bound) noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() noexcept;

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

/// Keyed mix of a parent seed with a word sequence. For a fixed parent and a
/// single word the map word -> seed is a bijection, so derived streams for
/// different indices never collide.
std::uint64_t derive_seed(std::uint64_t parent, std::span<const std::uint64_t> words) noexcept;

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> words) noexcept
{
    return derive_seed(parent, std::span<const std::uint64_t>(words.begin(), words.size()));
}

/// Generator seeded from derive_seed(parent, words).
inline Pcg32 make_stream(std::uint64_t parent, std::initializer_list<std::uint64_t> words) noexcept
{
    return Pcg32(derive_seed(parent, words));
}

/// Fisher-Yates shuffle driven by Pcg32.
template <class T>
void shuffle(std::span<T> items, Pcg32& rng) noexcept
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.below(static_cast<std::uint32_t>(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Domain-separation tags for derive_seed. Changing any value changes every
/// downstream result.
namespace seed_tag {
inline constexpr std::uint64_t partition = 0x5041525449ULL;
inline constexpr std::uint64_t cv_seed_list = 0x4356534545ULL;
inline constexpr std::uint64_t learner_seed_list = 0x4C52534545ULL;
inline constexpr std::uint64_t rcv_cv = 0x524356435652ULL;
inline constexpr std::uint64_t rcv_learner = 0x5243564C52ULL;
inline constexpr std::uint64_t nx0_learner = 0x4E58304C52ULL;
inline constexpr std::uint64_t permutation = 0x5045524D55ULL;
inline constexpr std::uint64_t sim_blocks = 0x53494D424CULL;
inline constexpr std::uint64_t sim_noise = 0x53494D4E4FULL;
}  // namespace seed_tag

}  // namespace bcv
