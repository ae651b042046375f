#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dforge/linalg.hpp"

namespace dforge {

// Oracle view of a closed convex set in R^n: membership, Euclidean projection
// and, when available, the support function max_{x in set} g'x.
class ConvexSet {
 public:
  explicit ConvexSet(Eigen::Index dim) : dim_(dim) {}
  virtual ~ConvexSet() = default;

  Eigen::Index dim() const { return dim_; }

  virtual Vec project(const Vec& x) const = 0;
  // Default: distance to the projection, relative to max(1, |x|).
  virtual bool contains(const Vec& x, double tol = 1e-9) const;

  // Maximizer of g'x over the set if the set can produce one for this g
  // (nullopt when unbounded in direction g or not supported).
  virtual std::optional<Vec> try_support_point(const Vec& g) const;
  // True when try_support_point succeeds for every g (compact sets only).
  virtual bool has_support() const { return false; }
  // Throws CapabilityError when unavailable.
  Vec support_point(const Vec& g) const;
  double support(const Vec& g) const;

  // Radius of an origin-centred ball containing the set.
  virtual std::optional<double> bound_radius() const { return std::nullopt; }
  virtual bool is_singleton() const { return false; }
  virtual bool is_whole_space() const { return false; }
  virtual std::string describe() const = 0;

 protected:
  void check_dim(const Vec& x, const char* who) const;

 private:
  Eigen::Index dim_;
};

using SetPtr = std::shared_ptr<const ConvexSet>;

class WholeSpace final : public ConvexSet {
 public:
  explicit WholeSpace(Eigen::Index dim) : ConvexSet(dim) {}
  Vec project(const Vec& x) const override { return x; }
  bool contains(const Vec& x, double) const override { return x.size() == dim(); }
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool is_whole_space() const override { return true; }
  std::string describe() const override;
};

class Singleton final : public ConvexSet {
 public:
  explicit Singleton(Vec p);
  const Vec& point() const { return p_; }
  Vec project(const Vec&) const override { return p_; }
  std::optional<Vec> try_support_point(const Vec&) const override { return p_; }
  bool has_support() const override { return true; }
  std::optional<double> bound_radius() const override { return p_.norm(); }
  bool is_singleton() const override { return true; }
  std::string describe() const override;

 private:
  Vec p_;
};

// Axis-aligned box; infinite bounds allowed.
class Box final : public ConvexSet {
 public:
  Box(Vec lo, Vec hi);
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return bounded_; }
  std::optional<double> bound_radius() const override;
  bool is_singleton() const override { return bounded_ && (hi_ - lo_).maxCoeff() == 0.0; }
  std::string describe() const override;

 private:
  Vec lo_, hi_;
  bool bounded_;
};

class Ball final : public ConvexSet {
 public:
  Ball(Vec center, double radius);
  const Vec& center() const { return c_; }
  double radius() const { return r_; }
  Vec project(const Vec& x) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return true; }
  std::optional<double> bound_radius() const override { return c_.norm() + r_; }
  bool is_singleton() const override { return r_ == 0.0; }
  std::string describe() const override;

 private:
  Vec c_;
  double r_;
};

// {x : sum x = total, lo <= x <= hi}; the probability simplex by default.
class Simplex final : public ConvexSet {
 public:
  explicit Simplex(Eigen::Index dim, double total = 1.0);
  Simplex(Vec lo, Vec hi, double total = 1.0);
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return true; }
  std::optional<double> bound_radius() const override;
  std::string describe() const override;
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

 private:
  Vec lo_, hi_;
  double total_;
};

// base ∩ {x : A x <= b}. Rows of A are normalised at construction.
class HalfSpaceIntersection final : public ConvexSet {
 public:
  HalfSpaceIntersection(SetPtr base, const Mat& a, const Vec& b);
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  std::optional<double> bound_radius() const override { return base_->bound_radius(); }
  bool is_singleton() const override { return base_->is_singleton(); }
  std::string describe() const override;

  const SetPtr& base() const { return base_; }
  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }
  // sqrt of min over x in base of sum_k max(0, a_k'x - b_k)^2.
  double infeasibility() const;
  bool is_empty(double threshold = 1e-7) const { return infeasibility() > threshold; }

 private:
  SetPtr base_;
  Mat a_;
  Vec b_;
  bool trivially_empty_ = false;
};

// Symmetric d x d matrices (column-major vectorised, dimension d*d) with
// lower <= X <= upper in the Loewner order; either bound may be absent.
class PsdInterval final : public ConvexSet {
 public:
  PsdInterval(std::optional<Mat> lower, std::optional<Mat> upper);
  static std::shared_ptr<PsdInterval> cone(Eigen::Index d);
  Eigen::Index side() const { return d_; }
  const std::optional<Mat>& lower() const { return lower_; }
  const std::optional<Mat>& upper() const { return upper_; }
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return lower_ && upper_ && scalar_; }
  std::optional<double> bound_radius() const override;
  bool is_singleton() const override;
  std::string describe() const override;

 private:
  Eigen::Index d_;
  std::optional<Mat> lower_, upper_;
  bool scalar_ = false;  // both bounds multiples of identity
  double lo_scalar_ = 0.0, hi_scalar_ = 0.0;
};

// Cartesian product; vectors are concatenations of the part vectors.
class ProductSet final : public ConvexSet {
 public:
  explicit ProductSet(std::vector<SetPtr> parts);
  const std::vector<SetPtr>& parts() const { return parts_; }
  const std::vector<Eigen::Index>& offsets() const { return offsets_; }
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override;
  std::optional<double> bound_radius() const override;
  bool is_singleton() const override;
  bool is_whole_space() const override;
  std::string describe() const override;

 private:
  std::vector<SetPtr> parts_;
  std::vector<Eigen::Index> offsets_;
};

// {s x : x in inner}, s > 0.
class ScaledSet final : public ConvexSet {
 public:
  ScaledSet(SetPtr inner, double s);
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<Vec> try_support_point(const Vec& g) const override;
  bool has_support() const override { return inner_->has_support(); }
  std::optional<double> bound_radius() const override;
  bool is_singleton() const override { return inner_->is_singleton(); }
  std::string describe() const override;

 private:
  SetPtr inner_;
  double s_;
};

// {y : A' y in inner}; projection by ADMM.
class PreimageSet final : public ConvexSet {
 public:
  PreimageSet(SetPtr inner, Mat a);
  Vec project(const Vec& y) const override;
  bool contains(const Vec& y, double tol = 1e-9) const override;
  std::string describe() const override;

 private:
  SetPtr inner_;
  Mat a_;  // dim() x inner dim
  Eigen::LLT<Mat> factor_;
};

// Intersection of convex sets; projection by Dykstra's algorithm.
class IntersectionSet final : public ConvexSet {
 public:
  explicit IntersectionSet(std::vector<SetPtr> sets);
  Vec project(const Vec& x) const override;
  bool contains(const Vec& x, double tol = 1e-9) const override;
  std::optional<double> bound_radius() const override;
  std::string describe() const override;

 private:
  std::vector<SetPtr> sets_;
};

// Convenience constructors.
SetPtr whole_space(Eigen::Index d);
SetPtr singleton(Vec p);
SetPtr box(Vec lo, Vec hi);
SetPtr ball(Vec c, double r);
SetPtr product(std::vector<SetPtr> parts);
// S ∩ B(0, r) with the cheapest representation.
SetPtr restrict_to_ball(const SetPtr& s, double r);

}  // namespace dforge
