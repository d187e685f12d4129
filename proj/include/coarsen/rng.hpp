#pragma once

#include <cstdint>

namespace coarsen {

/**
 * @brief Counter-based generator: output n is the splitmix64 finalizer of key + n * golden.
 *
 * The stream is a pure function of (seed, counter), so it is identical on every
 * platform and can be resumed from a stored counter.
 */
class CounterRng {
public:
    static constexpr const char* algorithm = "splitmix64-ctr";

    explicit CounterRng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), key_(mix(seed)), counter_(counter) {}

    static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() { return mix(key_ + ++counter_ * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased (Lemire's multiply and reject).
    std::uint64_t below(std::uint64_t n)
    {
        unsigned __int128 m = (unsigned __int128)next() * n;
        auto lo = std::uint64_t(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = (unsigned __int128)next() * n;
                lo = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    bool coin() { return next() >> 63; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_, key_, counter_;
};

} // namespace coarsen
