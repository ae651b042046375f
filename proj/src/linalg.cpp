#include "dforge/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "dforge/errors.hpp"

namespace dforge {

Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat unvec(const Vec& v, Eigen::Index d) {
  if (v.size() != d * d) throw InvalidArgument("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), d, d);
}

Mat unvec(const Eigen::Ref<const Vec>& v, Eigen::Index offset, Eigen::Index d) {
  if (offset + d * d > v.size()) throw InvalidArgument("unvec: size mismatch");
  Mat m(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = v[offset + j * d + i];
  return m;
}

Eigen::Index square_side(Eigen::Index n) {
  auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  return d * d == n ? d : -1;
}

namespace {

Mat spectral_map(const Mat& s, double (*f)(double)) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s));
  Vec ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = f(ev[i]);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Mat sqrtm_psd(const Mat& s) {
  return spectral_map(s, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

Mat inv_sqrtm_psd(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw DomainError("inverse square root of a singular matrix");
  Vec ev = es.eigenvalues().array().rsqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

bool is_psd(const Mat& s, double tol) {
  if (s.rows() != s.cols()) return false;
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, s.cwiseAbs().maxCoeff()))
    return false;
  return min_eigenvalue(s) >= -tol * std::max(1.0, s.cwiseAbs().maxCoeff());
}

Mat project_psd(const Mat& s) {
  return spectral_map(s, [](double x) { return std::max(x, 0.0); });
}

Mat clip_spectrum(const Mat& s, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(s));
  Vec ev = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double normal_upper_tail(double s) { return 0.5 * std::erfc(s / std::sqrt(2.0)); }

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace dforge
