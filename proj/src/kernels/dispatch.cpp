#include <atomic>

#include "dforge/kernels.hpp"

namespace dforge::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(DFORGE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

// -1: automatic
std::atomic<int> forced{-1};

}  // namespace

bool isa_available(Isa isa) {
  static const bool avx2_ok = cpu_has_avx2();
  return isa == Isa::scalar || avx2_ok;
}

Isa active_isa() {
  int f = forced.load(std::memory_order_relaxed);
  if (f >= 0) return static_cast<Isa>(f);
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(std::optional<Isa> isa) {
  if (isa && !isa_available(*isa)) isa = Isa::scalar;
  forced.store(isa ? static_cast<int>(*isa) : -1, std::memory_order_relaxed);
}

double dot(const double* a, const double* b, Index n) {
  return active_isa() == Isa::avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out) {
  if (active_isa() == Isa::avx2)
    avx2::affine_scores(x, d, n, h, a, out);
  else
    scalar::affine_scores(x, d, n, h, a, out);
}

void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out) {
  if (active_isa() == Isa::avx2)
    avx2::quadratic_scores(x, d, n, h, hm, a, out);
  else
    scalar::quadratic_scores(x, d, n, h, hm, a, out);
}

}  // namespace dforge::kernels
