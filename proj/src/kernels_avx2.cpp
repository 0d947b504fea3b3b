#include "symhrl/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define SYMHRL_HAVE_X86 1
#else
#define SYMHRL_HAVE_X86 0
#endif

namespace symhrl::kernels::avx2 {

#if SYMHRL_HAVE_X86

#define SYMHRL_AVX2 __attribute__((target("avx2,fma")))

namespace {
SYMHRL_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}
}  // namespace

SYMHRL_AVX2 double dot(const double* a, const double* b, std::size_t n) {
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

SYMHRL_AVX2 void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

SYMHRL_AVX2 void prob_sum(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(acc + i);
    const __m256d b = _mm256_loadu_pd(x + i);
    // a + b - a*b == a + b*(1 - a)
    const __m256d one_minus_a = _mm256_sub_pd(_mm256_set1_pd(1.0), a);
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(b, one_minus_a, a));
  }
  for (; i < n; ++i) acc[i] = acc[i] + x[i] - acc[i] * x[i];
}

SYMHRL_AVX2 void gemv(const double* w, const double* x, const double* b, double* y,
                      std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + dot(w + r * cols, x, cols);
}

SYMHRL_AVX2 void gemv_t_acc(const double* w, const double* g, double* out, std::size_t rows,
                            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(g[r], w + r * cols, out, cols);
}

SYMHRL_AVX2 void outer_acc(const double* g, const double* x, double* w, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(g[r], x, w + r * cols, cols);
}

#else

double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
void prob_sum(double* acc, const double* x, std::size_t n) { scalar::prob_sum(acc, x, n); }
void gemv(const double* w, const double* x, const double* b, double* y, std::size_t rows,
          std::size_t cols) {
  scalar::gemv(w, x, b, y, rows, cols);
}
void gemv_t_acc(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols) {
  scalar::gemv_t_acc(w, g, out, rows, cols);
}
void outer_acc(const double* g, const double* x, double* w, std::size_t rows, std::size_t cols) {
  scalar::outer_acc(g, x, w, rows, cols);
}

#endif

}  // namespace symhrl::kernels::avx2
