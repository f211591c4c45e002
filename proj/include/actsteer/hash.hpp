#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace actsteer {

// 64-bit FNV-1a.
class Fnv1a {
public:
    void update(std::span<const std::uint8_t> bytes) noexcept {
        for (std::uint8_t b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::span<const double> values) noexcept {
        for (double v : values) {
            std::uint8_t raw[sizeof(double)];
            std::memcpy(raw, &v, sizeof raw);
            update(raw);
        }
    }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) noexcept {
    Fnv1a h;
    h.update(bytes);
    return h.digest();
}

inline std::uint64_t fnv1a(std::span<const double> values) noexcept {
    Fnv1a h;
    h.update(values);
    return h.digest();
}

}  // namespace actsteer
