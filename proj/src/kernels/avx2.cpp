#include <vector>

#include "dforge/kernels.hpp"

#if defined(DFORGE_HAVE_AVX2)
#include <immintrin.h>

namespace dforge::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

double dot(const double* a, const double* b, Index n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  Index i = 0;
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

void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out) {
  for (Index j = 0; j < n; ++j) out[j] = dot(h, x + j * d, d) + a;
}

void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out) {
  std::vector<double> y(static_cast<std::size_t>(d));
  for (Index j = 0; j < n; ++j) {
    const double* xj = x + j * d;
    for (Index i = 0; i < d; ++i) y[i] = 0.0;
    for (Index k = 0; k < d; ++k) {
      const double* col = hm + k * d;
      __m256d xk = _mm256_set1_pd(xj[k]);
      Index i = 0;
      for (; i + 4 <= d; i += 4)
        _mm256_storeu_pd(y.data() + i,
                         _mm256_fmadd_pd(_mm256_loadu_pd(col + i), xk, _mm256_loadu_pd(y.data() + i)));
      for (; i < d; ++i) y[i] += col[i] * xj[k];
    }
    out[j] = dot(h, xj, d) + 0.5 * dot(xj, y.data(), d) + a;
  }
}

}  // namespace dforge::kernels::avx2

#else

namespace dforge::kernels::avx2 {

double dot(const double* a, const double* b, Index n) { return scalar::dot(a, b, n); }
void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out) {
  scalar::affine_scores(x, d, n, h, a, out);
}
void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out) {
  scalar::quadratic_scores(x, d, n, h, hm, a, out);
}

}  // namespace dforge::kernels::avx2

#endif
