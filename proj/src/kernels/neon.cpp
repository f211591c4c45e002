#include "kernels_internal.hpp"

#if defined(ACTSTEER_HAVE_NEON)

#include <arm_neon.h>

namespace actsteer::kernels::detail {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares_neon(const double* a, std::size_t n) {
    return dot_neon(a, a, n);
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void gemv_neon(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(w + r * cols, x, cols);
}

}  // namespace actsteer::kernels::detail

#endif
