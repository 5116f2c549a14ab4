#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "pyrotime/kernels.hpp"

namespace pyrotime::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(PYROTIME_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("PYROTIME_SIMD"); env && std::string_view(env) == "scalar") {
    return Isa::kScalar;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::kScalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument(std::string("ISA not available: ") + isa_name(isa));
  }
  current().store(isa, std::memory_order_relaxed);
}

#if defined(PYROTIME_HAVE_AVX2)
#define PYROTIME_DISPATCH(fn, ...) \
  (active_isa() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define PYROTIME_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void gemm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  PYROTIME_DISPATCH(gemm, m, n, k, a, b, c, accumulate);
}

double dot(const double* x, const double* y, std::size_t n) {
  return PYROTIME_DISPATCH(dot, x, y, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  PYROTIME_DISPATCH(axpy, alpha, x, y, n);
}

#undef PYROTIME_DISPATCH

}  // namespace pyrotime::kernels
