#pragma once

#include <optional>
#include <vector>

#include "dforge/saddle.hpp"

namespace dforge {

// phi(w) = h'w + a with certified risk: E exp(-phi) <= risk under the first
// family and E exp(phi) <= risk under the second.
struct AffineDetector {
  Vec h;
  double a = 0.0;
  double risk = 1.0;
  double gap = 0.0;
  bool certified = false;

  double operator()(const Vec& w) const;
  // Scores of the columns of a d x n observation block.
  Vec scores(const Mat& obs) const;
};

enum class Accept { H1, H2 };
const char* to_string(Accept a);

struct TestVerdict {
  Accept accepted = Accept::H1;
  double statistic = 0.0;
};

// Ties go to the first hypothesis.
TestVerdict decide(double statistic);

// a from the best responses at h*, risk = exp(sad_val); refuses an
// uncertified solution unless force is set.
AffineDetector build_detector(const SaddleSolution& solution, const SaddleProblem& problem,
                              bool force = false);

// Sum over observations of phi(w_t).
double apply_repeated(const AffineDetector& det, const std::vector<Vec>& observations);
double apply_repeated(const AffineDetector& det, const Mat& observations);
TestVerdict test_repeated(const AffineDetector& det, const std::vector<Vec>& observations);

double risk_after_K(double eps_star, int K);

// Observation-count ratio needed by the detector-based test to match the
// ideal test at risk delta; unrounded.
double k_to_match_ideal(double delta);

// Upper-tail standard normal integral (not the conventional erf).
double gaussian_erf(double s);

struct ErfBounds {
  double bound1 = 0.5;
  double bound2 = 0.5;
};
ErfBounds erf_risk(double delta, double alpha, double beta);

// Symmetric sub-Gaussian pair: means in U1 / U2 (U1 bounded), covariances
// in an optional shared set dominated by theta_star.
struct GaussianPairSpec {
  SetPtr U1, U2;
  SetPtr Ucov;  // vec'd d x d matrices; may be null
  Mat theta_star;
};

struct GaussianDetector {
  AffineDetector detector;
  double delta = 0.0;  // sqrt(h*' Theta* h*)
  Vec theta1, theta2;  // extremal means
  Vec w;               // (theta1 + theta2) / 2
  std::optional<SaddleSolution> solution;  // absent on the closed-form path
};

GaussianDetector gaussian_symmetric_detector(const GaussianPairSpec& spec,
                                             const SaddleOptions& opt = {});

}  // namespace dforge
