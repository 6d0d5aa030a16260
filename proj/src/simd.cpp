#include "sbo/simd.hpp"

#include <cstring>

namespace sbo::simd {

namespace {

struct Backend {
  void (*sqdist)(const double* const*, const double*, const double*,
                 std::size_t, std::size_t, double*);
  void (*expneg)(double*, std::size_t, double);
  double (*dotfn)(const double*, const double*, std::size_t);
  const char* name;
};

constexpr Backend kScalar{detail::weighted_sqdist_batch_scalar,
                          detail::exp_neg_scale_scalar, detail::dot_scalar,
                          "scalar"};

#if defined(__x86_64__)
constexpr Backend kAvx2{detail::weighted_sqdist_batch_avx2,
                        detail::exp_neg_scale_avx2, detail::dot_avx2, "avx2"};
bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#else
bool avx2_available() { return false; }
#endif

Backend pick_default() {
#if defined(__x86_64__)
  if (avx2_available()) return kAvx2;
#endif
  return kScalar;
}

Backend g_backend = pick_default();

}  // namespace

void weighted_sqdist_batch(const double* const* cols, const double* point,
                           const double* alpha, std::size_t dims,
                           std::size_t count, double* out) {
  g_backend.sqdist(cols, point, alpha, dims, count, out);
}

void exp_neg_scale(double* out, std::size_t count, double scale) {
  g_backend.expneg(out, count, scale);
}

double dot(const double* a, const double* b, std::size_t n) {
  return g_backend.dotfn(a, b, n);
}

const char* active_backend() { return g_backend.name; }

bool set_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_backend = kScalar;
    return true;
  }
#if defined(__x86_64__)
  if (std::strcmp(name, "avx2") == 0) {
    if (!avx2_available()) return false;
    g_backend = kAvx2;
    return true;
  }
#endif
  if (std::strcmp(name, "auto") == 0) {
    g_backend = pick_default();
    return true;
  }
  return false;
}

}  // namespace sbo::simd
