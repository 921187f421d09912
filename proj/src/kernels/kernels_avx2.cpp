// Compiled with -mavx2 -mfma. Only reached through avx2_table() after a CPU
// feature check, so nothing here may run on hardware without AVX2.

#include <immintrin.h>

#include <algorithm>

#include "role/kernels.hpp"

namespace role::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x,
               double* y) {
  std::size_t r = 0;
  // Four rows share each load of x.
  for (; r + 4 <= rows; r += 4) {
    const double* a0 = a + r * cols;
    const double* a1 = a0 + cols;
    const double* a2 = a1 + cols;
    const double* a3 = a2 + cols;
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d xv = _mm256_loadu_pd(x + j);
      s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + j), xv, s0);
      s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + j), xv, s1);
      s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + j), xv, s2);
      s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + j), xv, s3);
    }
    double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
    for (; j < cols; ++j) {
      t0 += a0[j] * x[j];
      t1 += a1[j] * x[j];
      t2 += a2[j] * x[j];
      t3 += a3[j] * x[j];
    }
    y[r] += t0;
    y[r + 1] += t1;
    y[r + 2] += t2;
    y[r + 3] += t3;
  }
  for (; r < rows; ++r) y[r] += dot_avx2(a + r * cols, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x,
                 double* y) {
  for (std::size_t i = 0; i < rows; ++i) axpy_avx2(x[i], a + i * cols, y, cols);
}

void ger_avx2(double alpha, const double* x, std::size_t m, const double* y, std::size_t n,
              double* a) {
  for (std::size_t i = 0; i < m; ++i) axpy_avx2(alpha * x[i], y, a + i * n, n);
}

// 4x8 register tile over a k-panel; B panel of kPanel x 8 stays in L1 while
// the i loop sweeps all rows of A.
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c) {
  constexpr std::size_t kPanel = 256;
  for (std::size_t p0 = 0; p0 < k; p0 += kPanel) {
    const std::size_t p1 = std::min(k, p0 + kPanel);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        double* c0 = c + i * n + j;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        __m256d c00 = _mm256_loadu_pd(c0), c01 = _mm256_loadu_pd(c0 + 4);
        __m256d c10 = _mm256_loadu_pd(c1), c11 = _mm256_loadu_pd(c1 + 4);
        __m256d c20 = _mm256_loadu_pd(c2), c21 = _mm256_loadu_pd(c2 + 4);
        __m256d c30 = _mm256_loadu_pd(c3), c31 = _mm256_loadu_pd(c3 + 4);
        const double* ar = a + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
          const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
          __m256d av = _mm256_broadcast_sd(ar + p);
          c00 = _mm256_fmadd_pd(av, b0, c00);
          c01 = _mm256_fmadd_pd(av, b1, c01);
          av = _mm256_broadcast_sd(ar + k + p);
          c10 = _mm256_fmadd_pd(av, b0, c10);
          c11 = _mm256_fmadd_pd(av, b1, c11);
          av = _mm256_broadcast_sd(ar + 2 * k + p);
          c20 = _mm256_fmadd_pd(av, b0, c20);
          c21 = _mm256_fmadd_pd(av, b1, c21);
          av = _mm256_broadcast_sd(ar + 3 * k + p);
          c30 = _mm256_fmadd_pd(av, b0, c30);
          c31 = _mm256_fmadd_pd(av, b1, c31);
        }
        _mm256_storeu_pd(c0, c00);
        _mm256_storeu_pd(c0 + 4, c01);
        _mm256_storeu_pd(c1, c10);
        _mm256_storeu_pd(c1 + 4, c11);
        _mm256_storeu_pd(c2, c20);
        _mm256_storeu_pd(c2 + 4, c21);
        _mm256_storeu_pd(c3, c30);
        _mm256_storeu_pd(c3 + 4, c31);
      }
      for (; i < m; ++i) {
        double* ci = c + i * n + j;
        __m256d s0 = _mm256_loadu_pd(ci), s1 = _mm256_loadu_pd(ci + 4);
        for (std::size_t p = p0; p < p1; ++p) {
          const __m256d av = _mm256_broadcast_sd(a + i * k + p);
          s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * n + j), s0);
          s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * n + j + 4), s1);
        }
        _mm256_storeu_pd(ci, s0);
        _mm256_storeu_pd(ci + 4, s1);
      }
    }
    // Column remainder.
    if (j < n) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t jj = j; jj < n; ++jj) {
          double s = c[i * n + jj];
          for (std::size_t p = p0; p < p1; ++p) s += a[i * k + p] * b[p * n + jj];
          c[i * n + jj] = s;
        }
      }
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{dot_avx2,    axpy_avx2, gemv_avx2,
                                 gemv_t_avx2, ger_avx2,  gemm_nn_avx2};
  return &table;
}

}  // namespace role::kernels::detail
