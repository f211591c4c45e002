#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace actsteer {

// splitmix64 finalizer; derives independent stream seeds from (seed, tag, index).
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) noexcept {
    return mix_seed(mix_seed(mix_seed(seed) ^ tag) ^ index);
}

// Standard normal draws with a fixed, library-independent transform so seeded
// corpora and weights are identical across standard library implementations.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double uniform() noexcept {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double operator()() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace actsteer
