#pragma once

#include <algorithm>
#include <cstring>
#include <type_traits>

#include "lowformer/parallel.hpp"
#include "lowformer/simd.hpp"

namespace lowformer::detail {

// C[M,N] (+)= A[M,K] * B[K,N]. Single precision goes through the dispatched
// SIMD kernel, double stays scalar (gradient-check path only).
template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
  if constexpr (std::is_same_v<T, float>) {
    simd::sgemm(M, N, K, A, B, C, accumulate);
  } else {
    if (!accumulate) std::fill(C, C + static_cast<std::size_t>(M) * N, T(0));
    const int threads = static_cast<double>(M) * N * K < 65536.0 ? 1 : std::min(num_threads(), std::max(M, 1));
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int i = 0; i < M; ++i) {
      T* c = C + static_cast<std::size_t>(i) * N;
      const T* a = A + static_cast<std::size_t>(i) * K;
      for (int k = 0; k < K; ++k) {
        const T av = a[k];
        const T* b = B + static_cast<std::size_t>(k) * N;
        for (int j = 0; j < N; ++j) c[j] += av * b[j];
      }
    }
  }
}

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace lowformer::detail
