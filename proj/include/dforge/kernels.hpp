#pragma once

#include <Eigen/Core>
#include <optional>

// Batch detector kernels over column-major observation blocks (d x n).
// A scalar and an AVX2/FMA variant are built; the variant is chosen at run
// time from CPU features and can be pinned for equivalence testing.
namespace dforge::kernels {

using Index = Eigen::Index;

enum class Isa { scalar, avx2 };

Isa active_isa();
const char* isa_name(Isa isa);
bool isa_available(Isa isa);
// nullopt restores automatic selection.
void force_isa(std::optional<Isa> isa);

double dot(const double* a, const double* b, Index n);
// out[j] = h'x_j + a
void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out);
// out[j] = h'x_j + x_j' H x_j / 2 + a, H column-major d x d
void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out);

namespace scalar {
double dot(const double* a, const double* b, Index n);
void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out);
void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, Index n);
void affine_scores(const double* x, Index d, Index n, const double* h, double a, double* out);
void quadratic_scores(const double* x, Index d, Index n, const double* h, const double* hm,
                      double a, double* out);
}  // namespace avx2

}  // namespace dforge::kernels
