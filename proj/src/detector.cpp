#include "dforge/detector.hpp"

#include <cmath>

#include "dforge/kernels.hpp"

namespace dforge {

double AffineDetector::operator()(const Vec& w) const {
  if (w.size() != h.size())
    throw InvalidArgument("detector: observation has dimension " + std::to_string(w.size()) +
                          ", expected " + std::to_string(h.size()));
  return h.dot(w) + a;
}

Vec AffineDetector::scores(const Mat& obs) const {
  if (obs.rows() != h.size())
    throw InvalidArgument("detector: observation block is " + shape_str(obs) + ", expected " +
                          std::to_string(h.size()) + " rows");
  Vec out(obs.cols());
  kernels::affine_scores(obs.data(), obs.rows(), obs.cols(), h.data(), a, out.data());
  return out;
}

const char* to_string(Accept a) { return a == Accept::H1 ? "H1" : "H2"; }

TestVerdict decide(double statistic) {
  return {statistic >= 0.0 ? Accept::H1 : Accept::H2, statistic};
}

AffineDetector build_detector(const SaddleSolution& s, const SaddleProblem& p, bool force) {
  if (!s.certified && !force)
    throw NumericError("build_detector: saddle solution is not certified (gap " +
                           std::to_string(s.gap) + ")",
                       s.gap);
  if (s.h_star.size() != p.data1.obs_dim())
    throw InvalidArgument("build_detector: solution does not match the problem dimension");
  auto [m1, v1] = maximize_phi(p.data1, -s.h_star);
  auto [m2, v2] = maximize_phi(p.data2, s.h_star);
  AffineDetector det;
  det.h = s.h_star;
  det.a = 0.5 * (v1 - v2);
  det.risk = std::min(1.0, std::exp(0.5 * (v1 + v2)));
  det.gap = s.gap;
  det.certified = s.certified;
  return det;
}

double apply_repeated(const AffineDetector& det, const std::vector<Vec>& obs) {
  double sum = 0.0;
  for (const Vec& w : obs) sum += det(w);
  return sum;
}

double apply_repeated(const AffineDetector& det, const Mat& obs) {
  if (obs.cols() == 0) return 0.0;
  return det.scores(obs).sum();
}

TestVerdict test_repeated(const AffineDetector& det, const std::vector<Vec>& obs) {
  return decide(apply_repeated(det, obs));
}

double risk_after_K(double eps, int K) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("risk_after_K: risk must lie in (0, 1]");
  if (K < 1) throw InvalidArgument("risk_after_K: K must be positive");
  return std::pow(eps, K);
}

double k_to_match_ideal(double delta) {
  if (!(delta > 0.0 && delta < 0.5))
    throw InvalidArgument("k_to_match_ideal: delta must lie in (0, 1/2)");
  return 2.0 / (1.0 - std::log(4.0 * (1.0 - delta)) / std::log(1.0 / delta));
}

double gaussian_erf(double s) { return normal_upper_tail(s); }

ErfBounds erf_risk(double delta, double alpha, double beta) {
  if (!(delta >= 0.0)) throw InvalidArgument("erf_risk: delta must be nonnegative");
  const double d2 = delta * delta;
  if (alpha > d2 || beta > d2)
    throw InvalidArgument("erf_risk: alpha and beta must not exceed delta^2");
  if (delta == 0.0) return {0.5, 0.5};
  return {gaussian_erf(delta - alpha / delta), gaussian_erf(delta - beta / delta)};
}

namespace {

void validate(const GaussianPairSpec& spec) {
  if (!spec.U1 || !spec.U2) throw InvalidArgument("gaussian detector: null mean set");
  Eigen::Index d = spec.U1->dim();
  if (spec.U2->dim() != d) throw InvalidArgument("gaussian detector: mean sets differ in dimension");
  if (spec.theta_star.rows() != d || spec.theta_star.cols() != d)
    throw InvalidArgument("gaussian detector: Theta* must be " + std::to_string(d) + "x" +
                          std::to_string(d) + ", got " + shape_str(spec.theta_star));
  if (!spec.U1->bound_radius())
    throw InvalidArgument("gaussian detector: U1 must be bounded");
  Mat ts = sym(spec.theta_star);
  if (min_eigenvalue(ts) <= 1e-12 * std::max(1.0, max_eigenvalue(ts)))
    throw InvalidParameter("gaussian detector: Theta* must be positive definite");
  if (spec.Ucov) {
    if (spec.Ucov->dim() != d * d)
      throw InvalidArgument("gaussian detector: covariance set has the wrong dimension");
    for (const Vec& p : probe_points(*spec.Ucov)) {
      Mat cov = unvec(p, d);
      if (!is_psd(sym(ts - cov), 1e-9 * std::max(1.0, ts.norm())))
        throw InvalidParameter("gaussian detector: Theta* does not dominate the covariance set");
    }
  }
}

}  // namespace

GaussianDetector gaussian_symmetric_detector(const GaussianPairSpec& spec, const SaddleOptions& opt) {
  validate(spec);
  const Eigen::Index d = spec.U1->dim();
  const Mat ts = sym(spec.theta_star);
  Eigen::LLT<Mat> llt(ts);
  GaussianDetector out;

  if (spec.U1->is_singleton() && spec.U2->is_singleton()) {
    out.theta1 = spec.U1->project(Vec::Zero(d));
    out.theta2 = spec.U2->project(Vec::Zero(d));
    Vec diff = out.theta1 - out.theta2;
    Vec h = 0.5 * llt.solve(diff);
    out.w = 0.5 * (out.theta1 + out.theta2);
    out.detector.h = h;
    out.detector.a = -h.dot(out.w);
    out.detector.risk = std::exp(-0.125 * diff.dot(llt.solve(diff)));
    out.detector.certified = true;
    out.delta = std::sqrt(h.dot(ts * h));
    return out;
  }

  SetPtr cov = singleton(vec(ts));
  SaddleProblem problem(sub_gaussian_family(spec.U1, cov), sub_gaussian_family(spec.U2, cov), opt);
  SaddleSolution s = solve_saddle(problem);
  out.detector = build_detector(s, problem);
  out.theta1 = s.mu1_star.head(d);
  out.theta2 = s.mu2_star.head(d);
  out.w = 0.5 * (out.theta1 + out.theta2);
  out.delta = std::sqrt(s.h_star.dot(ts * s.h_star));
  out.solution = std::move(s);
  return out;
}

}  // namespace dforge
