#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>

namespace dforge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Column-major flattening of a square matrix and its inverse.
Vec vec(const Mat& m);
Mat unvec(const Vec& v, Eigen::Index d);
Mat unvec(const Eigen::Ref<const Vec>& v, Eigen::Index offset, Eigen::Index d);

// Integer d with d*d == n, or -1.
Eigen::Index square_side(Eigen::Index n);

// Symmetric square root / inverse square root of a psd matrix.
Mat sqrtm_psd(const Mat& s);
Mat inv_sqrtm_psd(const Mat& s);

double min_eigenvalue(const Mat& s);
double max_eigenvalue(const Mat& s);
double spectral_norm(const Mat& m);

bool is_psd(const Mat& s, double tol = 1e-10);

// Frobenius projection onto the psd cone (negative eigenvalues clipped).
Mat project_psd(const Mat& s);

// Clip eigenvalues of a symmetric matrix to [lo, hi].
Mat clip_spectrum(const Mat& s, double lo, double hi);

// Upper-tail standard normal integral Q(s) = P(N(0,1) >= s).
double normal_upper_tail(double s);

std::string shape_str(const Mat& m);

}  // namespace dforge
