#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dforge/detector.hpp"
#include "dforge/regular_data.hpp"

namespace dforge {

// ---- relaxations of {Z(u) = [u;1][u;1]' : u in U}

struct ZSupport {
  double value = 0.0;
  Mat maximizer;  // (m+1) x (m+1), last diagonal entry 1
};
using ZOracle = std::function<ZSupport(const Mat& w)>;

// Either a Shor relaxation {W >= 0 : W(m,m) = 1, Tr(C_k W) <= 0}, where each
// C_k encodes a quadratic constraint [u;1]' C_k [u;1] <= 0 valid on U, or a
// caller-supplied support oracle.
class LiftZ {
 public:
  // Needs a nonnegative combination of the upper-left blocks that is
  // positive definite (bounded relaxation).
  static std::shared_ptr<const LiftZ> shor(std::vector<Mat> constraints);
  // (u_i - lo_i)(u_i - hi_i) <= 0 for each coordinate
  static std::shared_ptr<const LiftZ> box(const Vec& lo, const Vec& hi);
  // |u - c|^2 <= r^2
  static std::shared_ptr<const LiftZ> ball(const Vec& c, double r);
  static std::shared_ptr<const LiftZ> oracle(Eigen::Index m, ZOracle fn, std::string name);
  // Box or Ball sets; anything else needs an explicit relaxation.
  static std::shared_ptr<const LiftZ> from_set(const ConvexSet& u);

  Eigen::Index m() const { return m_; }
  bool is_shor() const { return !oracle_; }
  const std::vector<Mat>& constraints() const { return c_; }
  std::string describe() const;

  // Upper bound on max_{Z} Tr(W Z); exact for Shor sets up to the dual
  // solver tolerance, and always an upper bound there.
  ZSupport support(const Mat& w) const;
  bool contains_lift(const Vec& u, double tol = 1e-9) const;

  // Shor dual F(lambda; W) = r + q' M^{-1} q with [-M q; q' r] = W - sum lambda_k C_k;
  // +inf unless M > 0. x = M^{-1} q is the matching u.
  struct Dual {
    double value = INFINITY;
    Vec x;
    Vec grad_lambda;  // -[x;1]' C_k [x;1]
  };
  Dual dual(const Vec& lambda, const Mat& w) const;
  // Multipliers with M(lambda) > 0.
  Vec dual_start(const Mat& w) const;
  // Minimises the dual over lambda >= 0 (projected Newton).
  Dual min_dual(const Mat& w, Vec* lambda) const;

 private:
  LiftZ() = default;
  Eigen::Index m_ = 0;
  std::vector<Mat> c_;
  Mat ul_sum_;  // sum of upper-left blocks
  ZOracle oracle_;
  std::string name_;
};

// ---- Gaussian quadratic lifting

struct QuadLiftSpec {
  Mat A;                // d x (m+1): mean A [u; 1]
  SetPtr U;             // bounded, in R^m
  SetPtr Ucov;          // vec'd d x d covariances, each <= theta_star
  Mat theta_star;       // positive definite
  double gamma = 0.99;
  std::optional<double> delta;      // from compute_delta when absent
  std::shared_ptr<const LiftZ> Z;   // from U (box or ball) when null
};

// Validated spec with the derived quantities filled in.
struct LiftContext {
  QuadLiftSpec spec;
  Eigen::Index d = 0, m = 0;
  double delta = 0.0;
  double frob_coef = 0.0;  // delta (2 + delta) / (2 (1 - gamma))
  Mat T, T_inv, theta_inv;  // theta_star^{1/2}, theta_star^{-1/2}, theta_star^{-1}
  std::shared_ptr<const LiftZ> Z;
};
LiftContext make_lift_context(const QuadLiftSpec& spec);

// Bound on |Theta^{1/2} Theta*^{-1/2} - I| over Ucov: exact for singletons and
// for scalar intervals under a scalar Theta*, otherwise the universal 2.
double compute_delta(const ConvexSet& ucov, const Mat& theta_star);

// Clips the spectrum of Theta*^{1/2} H Theta*^{1/2} to [-gamma, gamma].
Mat project_h_gamma(const Mat& h, const Mat& theta_star, double gamma);

// Matrix Q[H, h] whose support value gives the Gamma term (times two).
Mat lift_q_matrix(const LiftContext& ctx, const Vec& h, const Mat& hm);

// Lifted observation is [zeta; vec(zeta zeta') / 2] and detector
// coefficients are [h; vec(H)], so x'omega = h'zeta + zeta'H zeta / 2.
RegularData lift_gaussian(const QuadLiftSpec& spec);
// Phi(h, H; Theta) directly.
double lifted_phi(const LiftContext& ctx, const Vec& h, const Mat& hm, const Mat& theta);
// [zeta; vec(zeta zeta') / 2].
Vec lift_observation(const Vec& zeta);

// phi(zeta) = h'zeta + zeta'H zeta / 2 + a.
struct QuadDetector {
  Vec h;
  Mat H;
  double a = 0.0;
  double risk = 1.0;
  double gap = 0.0;  // upper minus lower bound on ln risk
  double stationarity = 0.0;  // last squared Newton decrement
  int iterations = 0;
  bool converged = false;

  double operator()(const Vec& zeta) const;
  Vec scores(const Mat& obs) const;
};

enum class QuadMode { full, affine_only, pure_quadratic };
const char* to_string(QuadMode m);

struct QuadSolveOptions {
  QuadMode mode = QuadMode::full;
  int max_iter = 20000;  // Newton steps per restricted problem
  double gtol = 1e-12;  // squared Newton decrement ending each centering, relative
  double tol = 1e-6;    // relative gap on ln risk
  int outer_iter = 200; // ascent steps over non-singleton covariance sets
};

class QuadNonConvergence : public NumericError {
 public:
  QuadNonConvergence(const std::string& what, QuadDetector best)
      : NumericError(what, best.stationarity), best_(std::move(best)) {}
  const QuadDetector& best() const { return best_; }

 private:
  QuadDetector best_;
};

// Quadratic detector for N(A1[u;1], Theta) vs N(A2[u;1], Theta) over the
// lifted families; needs Shor relaxations.
QuadDetector solve_quad_detector(const QuadLiftSpec& spec1, const QuadLiftSpec& spec2,
                                 const QuadSolveOptions& opt = {});

// Affine detector of the H = 0 reduction: min_h max_{u1,u2} of
// (h'Theta1* h/2 + h'Theta2* h/2 + h'(A2[u2;1] - A1[u1;1])) / 2. U needs a
// support function.
AffineDetector special_case_affine(const QuadLiftSpec& spec1, const QuadLiftSpec& spec2,
                                   const SaddleOptions& opt = {});

// ---- bounded observations

// {Z >= 0 : Z(D-1,D-1) = 1, Tr(Q_l Z) <= 0} in vec'd S^D, with the support
// function supplied by the caller; projection by Dykstra.
class SpectahedronSet final : public ConvexSet {
 public:
  SpectahedronSet(Eigen::Index side, std::vector<Mat> q, ZOracle support);
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return static_cast<bool>(support_); }
  std::optional<double> bound_radius() const override { return radius_; }
  std::string describe() const override;
  Eigen::Index side() const { return side_; }

 private:
  Eigen::Index side_;
  std::vector<Mat> q_;
  ZOracle support_;
  double radius_ = 0.0;
};

// Bounded-support data over X+ refined by its own support function, with
// the shift g restricted to the Frobenius ball of radius g_radius.
RegularData lift_bounded_support(Eigen::Index d, std::vector<Mat> q, ZOracle support,
                                 double g_radius = 1.0);
// Crude sub-Gaussian cover of (zeta, Z(zeta)) for |zeta| <= 1, |Z| <= 1:
// parameters (theta, 2 I) with theta in U.
RegularData lift_bounded_subgaussian(SetPtr u);

}  // namespace dforge
