#pragma once

#include <cstddef>

// Runtime-dispatched compute kernels for the data-parallel inner loops:
// weighted squared distances of one point against a batch of points stored
// dimension-major, plus small reductions.  A scalar reference implementation
// always exists; on x86-64 an AVX2+FMA variant is selected at startup when
// the CPU supports it.  Both paths are equivalence-tested.

namespace sbo::simd {

// out[l] = sum_k alpha[k] * (cols[k][l] - point[k])^2, l = 0..count-1.
// cols[k] points at the contiguous array of coordinate k over the batch.
void weighted_sqdist_batch(const double* const* cols, const double* point,
                           const double* alpha, std::size_t dims,
                           std::size_t count, double* out);

// out[l] = scale * exp(-out[l])
void exp_neg_scale(double* out, std::size_t count, double scale);

double dot(const double* a, const double* b, std::size_t n);

// Name of the active backend: "avx2" or "scalar".
const char* active_backend();

// Force a backend for testing ("scalar", "avx2", "auto").  Returns false if
// the requested backend is unavailable on this machine.
bool set_backend(const char* name);

namespace detail {
void weighted_sqdist_batch_scalar(const double* const* cols,
                                  const double* point, const double* alpha,
                                  std::size_t dims, std::size_t count,
                                  double* out);
void exp_neg_scale_scalar(double* out, std::size_t count, double scale);
double dot_scalar(const double* a, const double* b, std::size_t n);

#if defined(__x86_64__)
void weighted_sqdist_batch_avx2(const double* const* cols,
                                const double* point, const double* alpha,
                                std::size_t dims, std::size_t count,
                                double* out);
void exp_neg_scale_avx2(double* out, std::size_t count, double scale);
double dot_avx2(const double* a, const double* b, std::size_t n);
#endif
}  // namespace detail

}  // namespace sbo::simd
