#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace fapd {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t tag64(std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return mix64(h);
}

constexpr std::uint64_t hash64(std::uint64_t value) noexcept { return mix64(value); }

template <typename... Rest>
constexpr std::uint64_t hash64(std::uint64_t first, std::uint64_t second, Rest... rest) noexcept {
    const std::uint64_t folded = mix64(mix64(first) ^ (second + 0x9E3779B97F4A7C15ULL + (first << 6) + (first >> 2)));
    if constexpr (sizeof...(rest) == 0) {
        return folded;
    } else {
        return hash64(folded, static_cast<std::uint64_t>(rest)...);
    }
}

// Counter-based random stream: draw i is mix64(key + (i + 1) * golden).
// Every value is a pure function of (key, counter), so results do not
// depend on the platform's <random> distributions or on thread scheduling.
class Stream {
public:
    explicit Stream(std::uint64_t key) noexcept : key_(key) {}
    Stream(std::uint64_t seed, std::string_view name) noexcept : key_(hash64(seed, tag64(name))) {}

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    // [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_positive() noexcept { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n > 0.
    std::uint64_t index(std::uint64_t n) noexcept {
        const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

    // Box-Muller; the second variate of each pair is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_positive()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Marsaglia-Tsang; shapes below 1 use the U^(1/a) boost.
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            const double boosted = gamma(shape + 1.0);
            return boosted * std::pow(uniform_positive(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_positive();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    template <typename T>
    void shuffle(std::span<T> values) noexcept {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(index(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fapd
