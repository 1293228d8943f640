// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "lowformer/simd.hpp"

namespace lowformer::simd::detail {

namespace {

constexpr int kBlockK = 256;
constexpr int kBlockN = 512;

// 4 rows x 16 columns register tile.
inline void tile_4x16(int k0, int k1, int N, int K, const float* A, const float* B, float* C, int i, int j) {
  float* c0 = C + static_cast<std::size_t>(i) * N + j;
  float* c1 = c0 + N;
  float* c2 = c1 + N;
  float* c3 = c2 + N;
  __m256 r00 = _mm256_loadu_ps(c0), r01 = _mm256_loadu_ps(c0 + 8);
  __m256 r10 = _mm256_loadu_ps(c1), r11 = _mm256_loadu_ps(c1 + 8);
  __m256 r20 = _mm256_loadu_ps(c2), r21 = _mm256_loadu_ps(c2 + 8);
  __m256 r30 = _mm256_loadu_ps(c3), r31 = _mm256_loadu_ps(c3 + 8);
  const float* a0 = A + static_cast<std::size_t>(i) * K;
  const float* a1 = a0 + K;
  const float* a2 = a1 + K;
  const float* a3 = a2 + K;
  for (int k = k0; k < k1; ++k) {
    const float* b = B + static_cast<std::size_t>(k) * N + j;
    const __m256 b0 = _mm256_loadu_ps(b), b1 = _mm256_loadu_ps(b + 8);
    __m256 a = _mm256_broadcast_ss(a0 + k);
    r00 = _mm256_fmadd_ps(a, b0, r00);
    r01 = _mm256_fmadd_ps(a, b1, r01);
    a = _mm256_broadcast_ss(a1 + k);
    r10 = _mm256_fmadd_ps(a, b0, r10);
    r11 = _mm256_fmadd_ps(a, b1, r11);
    a = _mm256_broadcast_ss(a2 + k);
    r20 = _mm256_fmadd_ps(a, b0, r20);
    r21 = _mm256_fmadd_ps(a, b1, r21);
    a = _mm256_broadcast_ss(a3 + k);
    r30 = _mm256_fmadd_ps(a, b0, r30);
    r31 = _mm256_fmadd_ps(a, b1, r31);
  }
  _mm256_storeu_ps(c0, r00);
  _mm256_storeu_ps(c0 + 8, r01);
  _mm256_storeu_ps(c1, r10);
  _mm256_storeu_ps(c1 + 8, r11);
  _mm256_storeu_ps(c2, r20);
  _mm256_storeu_ps(c2 + 8, r21);
  _mm256_storeu_ps(c3, r30);
  _mm256_storeu_ps(c3 + 8, r31);
}

// One row, columns [j, j1): 8-wide then scalar fma tail.
inline void tile_row(int k0, int k1, int N, int K, const float* A, const float* B, float* C, int i, int j, int j1) {
  float* c = C + static_cast<std::size_t>(i) * N;
  const float* a = A + static_cast<std::size_t>(i) * K;
  int jj = j;
  for (; jj + 8 <= j1; jj += 8) {
    __m256 r = _mm256_loadu_ps(c + jj);
    for (int k = k0; k < k1; ++k)
      r = _mm256_fmadd_ps(_mm256_broadcast_ss(a + k), _mm256_loadu_ps(B + static_cast<std::size_t>(k) * N + jj), r);
    _mm256_storeu_ps(c + jj, r);
  }
  for (; jj < j1; ++jj) {
    float r = c[jj];
    for (int k = k0; k < k1; ++k) r = std::fma(a[k], B[static_cast<std::size_t>(k) * N + jj], r);
    c[jj] = r;
  }
}

}  // namespace

void sgemm_rows_avx2(int m0, int m1, int N, int K, const float* A, const float* B, float* C) {
  for (int j0 = 0; j0 < N; j0 += kBlockN) {
    const int j1 = std::min(N, j0 + kBlockN);
    const int j16 = j0 + (j1 - j0) / 16 * 16;
    for (int k0 = 0; k0 < K; k0 += kBlockK) {
      const int k1 = std::min(K, k0 + kBlockK);
      int i = m0;
      for (; i + 4 <= m1; i += 4) {
        for (int j = j0; j < j16; j += 16) tile_4x16(k0, k1, N, K, A, B, C, i, j);
        if (j16 < j1)
          for (int r = 0; r < 4; ++r) tile_row(k0, k1, N, K, A, B, C, i + r, j16, j1);
      }
      for (; i < m1; ++i) tile_row(k0, k1, N, K, A, B, C, i, j0, j1);
    }
  }
}

void saxpy_avx2(int n, float a, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

}  // namespace lowformer::simd::detail

#endif
