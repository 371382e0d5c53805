// random.hpp — Seeded, index-addressable random streams

#pragma once

#include <cstdint>
#include <random>

namespace cohlab {

// Streams are keyed by (seed, purpose, index) so that work items can be
// processed in any order and still see the same numbers.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(purpose),
                          static_cast<std::uint32_t>(index),
                          static_cast<std::uint32_t>(index >> 32)};
        engine_.seed(seq);
    }

    // Uniform on the open interval (0, 1), 53 random bits.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    // Uniform on [lo, hi]; exact lo when lo == hi.
    double uniform(double lo, double hi) {
        if (lo == hi) return lo;
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

// Purpose tags separating the stream families.
namespace stream {
inline constexpr std::uint64_t trajectory = 1;
inline constexpr std::uint64_t sample = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t folds = 4;
inline constexpr std::uint64_t search = 5;
inline constexpr std::uint64_t scenario = 6;
inline constexpr std::uint64_t tree = 7;
} // namespace stream

// Fisher-Yates over [first, last) driven by an Rng.
template <class It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.below(i);
        using std::swap;
        swap(first[i - 1], first[j]);
    }
}

} // namespace cohlab
