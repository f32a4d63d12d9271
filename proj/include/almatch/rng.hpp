#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace almatch {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

// The helpers below avoid std:: distributions, whose output is
// implementation-defined, so seeded runs reproduce across standard libraries.

/// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const unsigned __int128 wide = static_cast<unsigned __int128>(rng()) * n;
    return static_cast<std::size_t>(wide >> 64);
}

/// Uniform double in [0, 1).
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class T>
void shuffle(std::span<T> items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[uniform_index(rng, i)]);
    }
}

}  // namespace almatch
