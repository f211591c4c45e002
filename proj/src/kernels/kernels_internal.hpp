#pragma once

#include <cstddef>

namespace actsteer::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double sum_squares_scalar(const double* a, std::size_t n);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
void scale_scalar(double a, double* x, std::size_t n);
void gemv_scalar(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);

#if defined(ACTSTEER_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
double sum_squares_avx2(const double* a, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void scale_avx2(double a, double* x, std::size_t n);
void gemv_avx2(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
#endif

#if defined(ACTSTEER_HAVE_NEON)
double dot_neon(const double* a, const double* b, std::size_t n);
double sum_squares_neon(const double* a, std::size_t n);
void axpy_neon(double a, const double* x, double* y, std::size_t n);
void scale_neon(double a, double* x, std::size_t n);
void gemv_neon(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
#endif

}  // namespace actsteer::kernels::detail
