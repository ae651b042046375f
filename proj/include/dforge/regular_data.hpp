#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dforge/convex_set.hpp"

namespace dforge {

enum class FamilyKind {
  sub_gaussian,
  poisson,
  discrete,
  bounded_support,
  direct_sum,
  iid_scale,
  semi_direct_sum,
  affine_image,
  support_refined,
  quad_lift_gaussian,
  custom,
};

std::string to_string(FamilyKind k);

// Observation-scheme tags for K-repeated tests: i.i.d. ("stationary") or
// driven by a sequence of factors, with the regular (R) or simple (S)
// family semantics.
enum class HypothesisKind { R, S, R_stationary, S_stationary };

std::string to_string(HypothesisKind k);
HypothesisKind hypothesis_kind_from_string(const std::string& s);

struct PhiEval {
  double value = 0.0;
  Vec grad_h;
  Vec grad_mu;
};

enum PhiNeed : unsigned { kValue = 0u, kGradH = 1u, kGradMu = 2u, kAll = 3u };

// Convex-concave Phi(h; mu) with gradients. Implementations must be pure.
class PhiOracle {
 public:
  virtual ~PhiOracle() = default;
  virtual PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const = 0;
  // True when Phi(h; .) is affine in mu for every h.
  virtual bool affine_in_mu() const { return false; }
  // False when Phi(.; mu) may have kinks (solvers then switch to
  // subgradient-based polishing).
  virtual bool smooth_in_h() const { return true; }
};

using PhiPtr = std::shared_ptr<const PhiOracle>;

// Regular data (H, M, Phi).
class RegularData {
 public:
  RegularData(SetPtr h_set, SetPtr m_set, PhiPtr phi, FamilyKind kind);

  const ConvexSet& H() const { return *h_; }
  const ConvexSet& M() const { return *m_; }
  const SetPtr& H_ptr() const { return h_; }
  const SetPtr& M_ptr() const { return m_; }
  const PhiPtr& oracle() const { return phi_; }
  FamilyKind kind() const { return kind_; }
  Eigen::Index obs_dim() const { return h_->dim(); }
  Eigen::Index param_dim() const { return m_->dim(); }

  double phi(const Vec& h, const Vec& mu) const;
  Vec grad_h(const Vec& h, const Vec& mu) const;
  Vec grad_mu(const Vec& h, const Vec& mu) const;
  PhiEval eval(const Vec& h, const Vec& mu, unsigned need = kAll) const;

  // Same Phi and H on a different parameter set (e.g. M restricted to a cell).
  RegularData with_param_set(SetPtr m) const;

 private:
  void check(const Vec& h, const Vec& mu) const;

  SetPtr h_, m_;
  PhiPtr phi_;
  FamilyKind kind_;
};

// ---- basic families

// M is a set of pairs (theta, Theta) laid out as [theta; vec(Theta)] in
// R^{d + d*d}.
RegularData sub_gaussian_family(SetPtr m);
RegularData sub_gaussian_family(SetPtr means, SetPtr covariances);
// Parameter vector for sub_gaussian_family from (theta, Theta).
Vec sub_gaussian_param(const Vec& theta, const Mat& cov);

RegularData poisson_family(SetPtr m);
RegularData discrete_family(SetPtr m);
// X must be compact with a support function; M inside X.
RegularData bounded_support_family(SetPtr x, SetPtr m);

// ---- calculus

RegularData direct_sum(const std::vector<RegularData>& parts);
RegularData iid_scale(const RegularData& data, const std::vector<double>& lambda);
// eps <= 0 selects min(1e-3, 1/(2L)).
RegularData semi_direct_sum(const std::vector<RegularData>& parts, double eps = 0.0);
// Observation omega -> A omega + a with A of size dbar x d.
RegularData affine_image(const RegularData& data, const Mat& a, const Vec& shift);
RegularData refine_with_support(const RegularData& data, SetPtr x, SetPtr g);

// Inner minimisers exposed for testing.
Vec semi_direct_weights(const RegularData& semi, const Vec& h, const Vec& mu);
Vec refine_shift(const RegularData& refined, const Vec& h, const Vec& mu);

// Draws a few deterministic points of a set (projections of pseudo-random
// vectors) used to validate parameter sets at construction.
std::vector<Vec> probe_points(const ConvexSet& s, int count = 16, double scale = 10.0);

}  // namespace dforge
