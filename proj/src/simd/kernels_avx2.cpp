#include "engsf/simd/kernels.hpp"

// AVX2 variants compiled in a dedicated translation unit so only this file
// needs -mavx2. Every kernel mirrors the scalar reference's operation tree
// exactly (same blocked accumulators, same combine order, multiply-then-add
// with no FMA), which makes the results bit-identical, not approximate.

#if defined(__AVX2__) && (defined(__x86_64__) || defined(_M_X64))
#define ENGSF_AVX2_COMPILED 1
#include <immintrin.h>
#else
#define ENGSF_AVX2_COMPILED 0
#endif

namespace engsf::simd {

#if ENGSF_AVX2_COMPILED

namespace {

void store_lanes(__m256d v, double* out4) { _mm256_storeu_pd(out4, v); }

double avx2_sum(const double* x, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
  }
  double acc[4];
  store_lanes(vacc, acc);
  if (i < n) acc[0] += x[i];
  if (i + 1 < n) acc[1] += x[i + 1];
  if (i + 2 < n) acc[2] += x[i + 2];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double avx2_dot(const double* a, const double* b, std::size_t n) {
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod =
        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    vacc = _mm256_add_pd(vacc, prod);
  }
  double acc[4];
  store_lanes(vacc, acc);
  if (i < n) acc[0] += a[i] * b[i];
  if (i + 1 < n) acc[1] += a[i + 1] * b[i + 1];
  if (i + 2 < n) acc[2] += a[i + 2] * b[i + 2];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void avx2_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void avx2_add_scaled(const double* x, double a, const double* k, double* out,
                     std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(k + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), t));
  }
  for (; i < n; ++i) out[i] = x[i] + a * k[i];
}

void avx2_rk4_combine(const double* x, const double* k1, const double* k2,
                      const double* k3, const double* k4, double dt,
                      double* out, std::size_t n) {
  const double c = dt / 6.0;
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_add_pd(_mm256_loadu_pd(k1 + i),
                              _mm256_mul_pd(two, _mm256_loadu_pd(k2 + i)));
    s = _mm256_add_pd(s, _mm256_mul_pd(two, _mm256_loadu_pd(k3 + i)));
    s = _mm256_add_pd(s, _mm256_loadu_pd(k4 + i));
    _mm256_storeu_pd(
        out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vc, s)));
  }
  for (; i < n; ++i) {
    double s = k1[i] + 2.0 * k2[i];
    s = s + 2.0 * k3[i];
    s = s + k4[i];
    out[i] = x[i] + c * s;
  }
}

void avx2_lorenz95_drift(const double* x, std::size_t m, double forcing,
                         double* out) {
  const __m256d vf = _mm256_set1_pd(forcing);
  std::size_t j = 2;
  // Vector body covers j..j+3 while j+4 <= m-1, so all loads stay in range.
  for (; j + 5 <= m; j += 4) {
    const __m256d p1 = _mm256_loadu_pd(x + j + 1);
    const __m256d m2 = _mm256_loadu_pd(x + j - 2);
    const __m256d m1 = _mm256_loadu_pd(x + j - 1);
    const __m256d xc = _mm256_loadu_pd(x + j);
    const __m256d t =
        _mm256_add_pd(_mm256_sub_pd(_mm256_mul_pd(_mm256_sub_pd(p1, m2), m1), xc), vf);
    _mm256_storeu_pd(out + j, t);
  }
  for (; j + 1 < m; ++j) {
    out[j] = ((x[j + 1] - x[j - 2]) * x[j - 1] - x[j]) + forcing;
  }
  out[0] = ((x[1] - x[m - 2]) * x[m - 1] - x[0]) + forcing;
  out[1] = ((x[2] - x[m - 1]) * x[0] - x[1]) + forcing;
  out[m - 1] = ((x[0] - x[m - 3]) * x[m - 2] - x[m - 1]) + forcing;
}

const KernelTable kAvx2Table = {
    Isa::Avx2,       avx2_sum,         avx2_dot,
    avx2_axpy,       avx2_add_scaled,  avx2_rk4_combine,
    avx2_lorenz95_drift,
};

}  // namespace

const KernelTable* avx2_kernel_table() {
  return __builtin_cpu_supports("avx2") ? &kAvx2Table : nullptr;
}

#else

const KernelTable* avx2_kernel_table() { return nullptr; }

#endif

}  // namespace engsf::simd
