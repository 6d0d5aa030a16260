// AVX2+FMA variants of the batch kernels.  Compiled with -mavx2 -mfma in its
// own translation unit; callers reach it only through the dispatch table
// after a runtime CPU check.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

#include "sbo/simd.hpp"

namespace sbo::simd::detail {

void weighted_sqdist_batch_avx2(const double* const* cols,
                                const double* point, const double* alpha,
                                std::size_t dims, std::size_t count,
                                double* out) {
  const std::size_t main = count & ~std::size_t(3);
  for (std::size_t l = 0; l < main; l += 4)
    _mm256_storeu_pd(out + l, _mm256_setzero_pd());
  for (std::size_t l = main; l < count; ++l) out[l] = 0.0;

  for (std::size_t k = 0; k < dims; ++k) {
    const double* col = cols[k];
    const __m256d p = _mm256_set1_pd(point[k]);
    const __m256d a = _mm256_set1_pd(alpha[k]);
    for (std::size_t l = 0; l < main; l += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(col + l), p);
      const __m256d acc = _mm256_loadu_pd(out + l);
      _mm256_storeu_pd(out + l, _mm256_fmadd_pd(_mm256_mul_pd(a, d), d, acc));
    }
    const double ps = point[k];
    const double as = alpha[k];
    for (std::size_t l = main; l < count; ++l) {
      const double d = col[l] - ps;
      out[l] = std::fma(as * d, d, out[l]);
    }
  }
}

void exp_neg_scale_avx2(double* out, std::size_t count, double scale) {
  // exp stays in libm; the win here is the distance accumulation above.
  for (std::size_t l = 0; l < count; ++l) out[l] = scale * std::exp(-out[l]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t main = n & ~std::size_t(3);
  for (std::size_t i = 0; i < main; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (std::size_t i = main; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

}  // namespace sbo::simd::detail

#endif  // __x86_64__
