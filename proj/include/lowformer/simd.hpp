#pragma once

#include <string_view>

namespace lowformer::simd {

enum class Isa { scalar, avx2 };

std::string_view name(Isa isa);
bool available(Isa isa);

// Best available ISA unless overridden by set_active() or LOWFORMER_ISA=scalar.
Isa active();
void set_active(Isa isa);

// C[M,N] (+)= A[M,K] * B[K,N]; all row-major and densely packed.
void sgemm(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);
void sgemm_with(Isa isa, int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);

// y[i] += a * x[i]
void saxpy(int n, float a, const float* x, float* y);
void saxpy_with(Isa isa, int n, float a, const float* x, float* y);

namespace detail {
// Row range [m0, m1) of the sgemm; callers handle threading.
void sgemm_rows_scalar(int m0, int m1, int N, int K, const float* A, const float* B, float* C);
void saxpy_scalar(int n, float a, const float* x, float* y);
#if defined(__x86_64__) || defined(_M_X64)
void sgemm_rows_avx2(int m0, int m1, int N, int K, const float* A, const float* B, float* C);
void saxpy_avx2(int n, float a, const float* x, float* y);
#endif
}  // namespace detail

}  // namespace lowformer::simd
