#include <vector>

#include "dforge/kernels.hpp"

namespace dforge::kernels::scalar {

double dot(const double* a, const double* b, Index n) {
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += a[i] * b[i];
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
      for (Index i = 0; i < d; ++i) y[i] += col[i] * xj[k];
    }
    out[j] = dot(h, xj, d) + 0.5 * dot(xj, y.data(), d) + a;
  }
}

}  // namespace dforge::kernels::scalar
