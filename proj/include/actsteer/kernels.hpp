#pragma once

// Dense float64 inner loops used by every steering and model routine.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2/FMA or NEON variant. The variant is picked once per
// process from CPU features (override with ACTSTEER_SIMD=scalar|avx2|neon).
// Within one process the choice never changes, so results are bit-stable
// across runs on the same machine.

#include <cstddef>
#include <span>
#include <string_view>

namespace actsteer::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* a, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x *= a
    void (*scale)(double a, double* x, std::size_t n);
    // y = W x, W row-major [rows, cols]
    void (*gemv)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

const KernelTable& active() noexcept;
std::string_view backend_name(Backend b) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}

inline double sum_squares(std::span<const double> a) noexcept {
    return active().sum_squares(a.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(a, x.data(), y.data(), x.size());
}

inline void scale(double a, std::span<double> x) noexcept {
    active().scale(a, x.data(), x.size());
}

inline void gemv(std::span<const double> w, std::span<const double> x, std::span<double> y) noexcept {
    active().gemv(w.data(), x.data(), y.data(), y.size(), x.size());
}

}  // namespace actsteer::kernels
