// Compiled with -mavx2 -mfma; only reached after the runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "pyrotime/kernels.hpp"

namespace pyrotime::kernels::avx2 {

namespace {

constexpr int kColBlock = 512;
constexpr int kDepthBlock = 64;

// 4x8 register tile: C[i..i+4, j..j+8] += A[i..i+4, p0..p1] * B[p0..p1, j..j+8]
inline void tile_4x8(int n, int k, const double* a, const double* b, double* c, int p0, int p1) {
  const double* a0 = a;
  const double* a1 = a + k;
  const double* a2 = a + 2 * static_cast<std::size_t>(k);
  const double* a3 = a + 3 * static_cast<std::size_t>(k);
  double* c0 = c;
  double* c1 = c + n;
  double* c2 = c + 2 * static_cast<std::size_t>(n);
  double* c3 = c + 3 * static_cast<std::size_t>(n);
  __m256d r00 = _mm256_loadu_pd(c0), r01 = _mm256_loadu_pd(c0 + 4);
  __m256d r10 = _mm256_loadu_pd(c1), r11 = _mm256_loadu_pd(c1 + 4);
  __m256d r20 = _mm256_loadu_pd(c2), r21 = _mm256_loadu_pd(c2 + 4);
  __m256d r30 = _mm256_loadu_pd(c3), r31 = _mm256_loadu_pd(c3 + 4);
  const double* bp = b + static_cast<std::size_t>(p0) * n;
  for (int p = p0; p < p1; ++p, bp += n) {
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(a0 + p);
    r00 = _mm256_fmadd_pd(av, b0, r00);
    r01 = _mm256_fmadd_pd(av, b1, r01);
    av = _mm256_broadcast_sd(a1 + p);
    r10 = _mm256_fmadd_pd(av, b0, r10);
    r11 = _mm256_fmadd_pd(av, b1, r11);
    av = _mm256_broadcast_sd(a2 + p);
    r20 = _mm256_fmadd_pd(av, b0, r20);
    r21 = _mm256_fmadd_pd(av, b1, r21);
    av = _mm256_broadcast_sd(a3 + p);
    r30 = _mm256_fmadd_pd(av, b0, r30);
    r31 = _mm256_fmadd_pd(av, b1, r31);
  }
  _mm256_storeu_pd(c0, r00);
  _mm256_storeu_pd(c0 + 4, r01);
  _mm256_storeu_pd(c1, r10);
  _mm256_storeu_pd(c1 + 4, r11);
  _mm256_storeu_pd(c2, r20);
  _mm256_storeu_pd(c2 + 4, r21);
  _mm256_storeu_pd(c3, r30);
  _mm256_storeu_pd(c3 + 4, r31);
}

// One row, 8 columns.
inline void tile_1x8(int n, const double* a, const double* b, double* c, int p0, int p1) {
  __m256d r0 = _mm256_loadu_pd(c), r1 = _mm256_loadu_pd(c + 4);
  const double* bp = b + static_cast<std::size_t>(p0) * n;
  for (int p = p0; p < p1; ++p, bp += n) {
    const __m256d av = _mm256_broadcast_sd(a + p);
    r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), r0);
    r1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), r1);
  }
  _mm256_storeu_pd(c, r0);
  _mm256_storeu_pd(c + 4, r1);
}

// Column remainder (< 8 columns) for a single row.
inline void tail_row(int n, const double* a, const double* b, double* c, int j0, int j1, int p0,
                     int p1) {
  for (int p = p0; p < p1; ++p) {
    const double av = a[p];
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int j = j0; j < j1; ++j) c[j] = std::fma(av, bp[j], c[j]);
  }
}

}  // namespace

void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
  for (int jj = 0; jj < n; jj += kColBlock) {
    const int jend = std::min(n, jj + kColBlock);
    const int jvec = jj + ((jend - jj) / 8) * 8;
    for (int pp = 0; pp < k; pp += kDepthBlock) {
      const int pend = std::min(k, pp + kDepthBlock);
      int i = 0;
      for (; i + 4 <= m; i += 4) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = jj; j < jvec; j += 8) tile_4x8(n, k, ai, b + j, ci + j, pp, pend);
        if (jvec < jend) {
          for (int r = 0; r < 4; ++r) {
            tail_row(n, ai + static_cast<std::size_t>(r) * k, b,
                     ci + static_cast<std::size_t>(r) * n, jvec, jend, pp, pend);
          }
        }
      }
      for (; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = jj; j < jvec; j += 8) tile_1x8(n, ai, b + j, ci + j, pp, pend);
        if (jvec < jend) tail_row(n, ai, b, ci, jvec, jend, pp, pend);
      }
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(s0, s1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace pyrotime::kernels::avx2
