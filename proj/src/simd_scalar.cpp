#include "sbo/simd.hpp"

#include <cmath>

namespace sbo::simd::detail {

void weighted_sqdist_batch_scalar(const double* const* cols,
                                  const double* point, const double* alpha,
                                  std::size_t dims, std::size_t count,
                                  double* out) {
  for (std::size_t l = 0; l < count; ++l) out[l] = 0.0;
  for (std::size_t k = 0; k < dims; ++k) {
    const double* col = cols[k];
    const double p = point[k];
    const double a = alpha[k];
    for (std::size_t l = 0; l < count; ++l) {
      const double d = col[l] - p;
      out[l] += a * d * d;
    }
  }
}

void exp_neg_scale_scalar(double* out, std::size_t count, double scale) {
  for (std::size_t l = 0; l < count; ++l) out[l] = scale * std::exp(-out[l]);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sbo::simd::detail
