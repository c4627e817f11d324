#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace nethop {

// Counter-based random streams. A draw is a pure function of
// (seed, purpose tag, replicate, counter), so parallel workers can consume
// any subset of a stream in any order and still see identical values.

constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::string_view tag, std::uint64_t rep = 0) noexcept
        : key_(mix64(mix64(seed) ^ fnv1a(tag)) ^ mix64(rep + 0x632be59bd9b4e019ULL))
    {
    }

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept
    {
        return mix64(key_ ^ mix64(counter));
    }

    //! Uniform on [0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept
    {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    bool bernoulli(std::uint64_t counter, double p) const noexcept { return uniform(counter) < p; }

    //! Standard normal via Box-Muller on counters (2c, 2c+1).
    double normal(std::uint64_t counter) const noexcept
    {
        const double u1 = 1.0 - uniform(2 * counter); // (0, 1]
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t below(std::uint64_t counter, std::uint64_t bound) const noexcept
    {
        return static_cast<std::uint64_t>(uniform(counter) * static_cast<double>(bound));
    }

private:
    std::uint64_t key_;
};

} // namespace nethop
