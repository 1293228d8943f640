#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <string>

#include "lowformer/parallel.hpp"
#include "lowformer/simd.hpp"

namespace lowformer::simd {

namespace detail {

constexpr int kBlockK = 256;
constexpr int kBlockN = 512;

// Same loop nest as the AVX2 kernel so both accumulate each C element in
// ascending k order.
void sgemm_rows_scalar(int m0, int m1, int N, int K, const float* A, const float* B, float* C) {
  for (int j0 = 0; j0 < N; j0 += kBlockN) {
    const int j1 = std::min(N, j0 + kBlockN);
    for (int k0 = 0; k0 < K; k0 += kBlockK) {
      const int k1 = std::min(K, k0 + kBlockK);
      for (int i = m0; i < m1; ++i) {
        float* c = C + static_cast<std::size_t>(i) * N;
        const float* a = A + static_cast<std::size_t>(i) * K;
        for (int k = k0; k < k1; ++k) {
          const float av = a[k];
          const float* b = B + static_cast<std::size_t>(k) * N;
          for (int j = j0; j < j1; ++j) c[j] += av * b[j];
        }
      }
    }
  }
}

void saxpy_scalar(int n, float a, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace detail

std::string_view name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool available(Isa isa) {
  if (isa == Isa::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("LOWFORMER_ISA")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa& active_ref() {
  static Isa isa = detect();
  return isa;
}

using RowKernel = void (*)(int, int, int, int, const float*, const float*, float*);

RowKernel row_kernel(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2) return detail::sgemm_rows_avx2;
#endif
  (void)isa;
  return detail::sgemm_rows_scalar;
}

}  // namespace

Isa active() { return active_ref(); }

void set_active(Isa isa) {
  if (!available(isa)) throw std::runtime_error(std::string("ISA not available on this host: ") + std::string(name(isa)));
  active_ref() = isa;
}

void sgemm_with(Isa isa, int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  if (M <= 0 || N <= 0) return;
  if (!accumulate) std::memset(C, 0, sizeof(float) * static_cast<std::size_t>(M) * N);
  if (K <= 0) return;
  RowKernel kern = row_kernel(isa);
  const double work = static_cast<double>(M) * N * K;
  const int threads = work < 65536.0 ? 1 : std::min(num_threads(), M);
  if (threads <= 1) {
    kern(0, M, N, K, A, B, C);
    return;
  }
  // Rows in blocks of 4 keep register tiles whole across threads.
  const int blocks = (M + 3) / 4;
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int bi = 0; bi < blocks; ++bi) {
    const int m0 = bi * 4;
    kern(m0, std::min(M, m0 + 4), N, K, A, B, C);
  }
}

void sgemm(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  sgemm_with(active(), M, N, K, A, B, C, accumulate);
}

void saxpy_with(Isa isa, int n, float a, const float* x, float* y) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2) return detail::saxpy_avx2(n, a, x, y);
#endif
  (void)isa;
  detail::saxpy_scalar(n, a, x, y);
}

void saxpy(int n, float a, const float* x, float* y) { saxpy_with(active(), n, a, x, y); }

}  // namespace lowformer::simd
