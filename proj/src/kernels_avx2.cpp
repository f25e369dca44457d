// AVX2 kernel variants. This file is compiled with -mavx2 -mfma on x86-64;
// on other architectures it degrades to a stub that reports "no AVX2 path".
//
// Reductions (dot, reduce_sum) accumulate in 4 lanes and combine at the end,
// so they are not bit-identical to the scalar reference; the equivalence
// tests bound the difference. Elementwise kernels use the same IEEE ops as
// the scalar reference in the same order per element and are bit-identical.

#include "kernels_detail.hpp"

#if defined(__AVX2__) && (defined(__x86_64__) || defined(_M_X64))

#include <immintrin.h>

namespace itrc::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// mul+add (no FMA) so results stay bit-identical to the scalar reference
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_avx2(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(m + r * cols, x, cols);
}

double reduce_max_avx2(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    m = _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double reduce_sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

// No FMA here: keeps elementwise results bit-identical to the scalar path.
void cell_state_avx2(const double* f, const double* g, const double* cprev,
                     double* c, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vf = _mm256_loadu_pd(f + i);
    __m256d a = _mm256_mul_pd(vf, _mm256_loadu_pd(cprev + i));
    __m256d b = _mm256_mul_pd(_mm256_sub_pd(one, vf), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(c + i, _mm256_add_pd(a, b));
  }
  for (; i < n; ++i) c[i] = f[i] * cprev[i] + (1.0 - f[i]) * g[i];
}

void highway_avx2(const double* r, const double* tc, const double* x,
                  double* h, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vr = _mm256_loadu_pd(r + i);
    __m256d a = _mm256_mul_pd(vr, _mm256_loadu_pd(tc + i));
    __m256d b = _mm256_mul_pd(_mm256_sub_pd(one, vr), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(h + i, _mm256_add_pd(a, b));
  }
  for (; i < n; ++i) h[i] = r[i] * tc[i] + (1.0 - r[i]) * x[i];
}

constexpr KernelTable kAvx2Table = {
    Backend::avx2,     dot_avx2,        axpy_avx2, matvec_avx2,
    reduce_max_avx2,   reduce_sum_avx2, cell_state_avx2,
    highway_avx2,
};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2Table; }

bool avx2_cpu_ok() noexcept {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace itrc::kernels

#else  // no AVX2 code path in this build

namespace itrc::kernels {

const KernelTable* avx2_table() noexcept { return nullptr; }
bool avx2_cpu_ok() noexcept { return false; }

}  // namespace itrc::kernels

#endif
