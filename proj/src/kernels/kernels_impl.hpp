#pragma once

// Raw kernel entry points. Kept free of standard-library templates so the
// AVX2 translation unit never emits inline code that could be merged into
// scalar callers.
#include <cstddef>

namespace uflst::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);

#if defined(UFLST_HAVE_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
#endif

}  // namespace uflst::kernels::detail
