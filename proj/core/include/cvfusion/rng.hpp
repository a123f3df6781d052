#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cvfusion {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derives an independent stream key from a parent key and a sub-stream id.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t stream) {
    return mix64(mix64(key) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

// FNV-1a, used to turn string ids into stream ids.
constexpr std::uint64_t hash_id(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so streams can be split per record and regenerated in any order.
/// The normal and uniform transforms are defined here rather than borrowed
/// from <random> because the standard distributions are implementation
/// defined and would break cross-platform reproducibility.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    CounterRng split(std::uint64_t stream) const { return CounterRng(derive_key(key_, stream)); }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace cvfusion
