#pragma once

// Dense arithmetic kernels behind the network and statistics code.
//
// Every kernel has a portable scalar reference in kernels::scalar and, on
// x86-64, an AVX2+FMA variant in kernels::avx2. The free functions in
// kernels:: dispatch to the variant chosen at startup: AVX2 when the CPU
// reports avx2 and fma, scalar otherwise. Setting PYROTIME_SIMD=scalar in
// the environment forces the reference path.

#include <cstddef>

namespace pyrotime::kernels {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();

/// Overrides the dispatch target; throws std::invalid_argument when the
/// requested ISA is unavailable on this CPU.
void set_active_isa(Isa isa);

/// C[M x N] = A[M x K] * B[K x N] (or += when accumulate), all row-major
/// with unit column stride.
void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

double dot(const double* x, const double* y, std::size_t n);

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

namespace scalar {
void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace pyrotime::kernels
