#include "actsteer/kernels.hpp"

#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace actsteer::kernels {

namespace {

constexpr KernelTable kScalar{
    Backend::scalar,        detail::dot_scalar,   detail::sum_squares_scalar,
    detail::axpy_scalar,    detail::scale_scalar, detail::gemv_scalar,
};

#if defined(ACTSTEER_HAVE_AVX2)
constexpr KernelTable kAvx2{
    Backend::avx2,        detail::dot_avx2,   detail::sum_squares_avx2,
    detail::axpy_avx2,    detail::scale_avx2, detail::gemv_avx2,
};
#endif

#if defined(ACTSTEER_HAVE_NEON)
constexpr KernelTable kNeon{
    Backend::neon,        detail::dot_neon,   detail::sum_squares_neon,
    detail::axpy_neon,    detail::scale_neon, detail::gemv_neon,
};
#endif

const KernelTable& select() noexcept {
    const char* env = std::getenv("ACTSTEER_SIMD");
    const std::string_view want = env != nullptr ? env : "auto";
    if (want == "scalar") return kScalar;
    if (want == "avx2" || want == "auto") {
        if (const KernelTable* t = avx2_table()) return *t;
    }
    if (want == "neon" || want == "auto") {
        if (const KernelTable* t = neon_table()) return *t;
    }
    return kScalar;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(ACTSTEER_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(ACTSTEER_HAVE_NEON)
    // Advanced SIMD is mandatory on AArch64.
    return &kNeon;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    static const KernelTable& table = select();
    return table;
}

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

}  // namespace actsteer::kernels
