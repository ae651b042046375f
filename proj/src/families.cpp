#include <cmath>
#include <sstream>

#include "dforge/errors.hpp"
#include "dforge/regular_data.hpp"
#include "dforge/rng.hpp"

namespace dforge {

std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::sub_gaussian: return "sub_gaussian";
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::discrete: return "discrete";
    case FamilyKind::bounded_support: return "bounded_support";
    case FamilyKind::direct_sum: return "direct_sum";
    case FamilyKind::iid_scale: return "iid_scale";
    case FamilyKind::semi_direct_sum: return "semi_direct_sum";
    case FamilyKind::affine_image: return "affine_image";
    case FamilyKind::support_refined: return "support_refined";
    case FamilyKind::quad_lift_gaussian: return "quad_lift_gaussian";
    case FamilyKind::custom: return "custom";
  }
  return "unknown";
}

std::string to_string(HypothesisKind k) {
  switch (k) {
    case HypothesisKind::R: return "R";
    case HypothesisKind::S: return "S";
    case HypothesisKind::R_stationary: return "R-stationary";
    case HypothesisKind::S_stationary: return "S-stationary";
  }
  return "unknown";
}

HypothesisKind hypothesis_kind_from_string(const std::string& s) {
  if (s == "R") return HypothesisKind::R;
  if (s == "S") return HypothesisKind::S;
  if (s == "R-stationary") return HypothesisKind::R_stationary;
  if (s == "S-stationary") return HypothesisKind::S_stationary;
  throw InvalidArgument("unknown hypothesis kind '" + s + "'");
}

RegularData::RegularData(SetPtr h_set, SetPtr m_set, PhiPtr phi, FamilyKind kind)
    : h_(std::move(h_set)), m_(std::move(m_set)), phi_(std::move(phi)), kind_(kind) {
  if (!h_ || !m_ || !phi_) throw InvalidArgument("regular data: null component");
}

void RegularData::check(const Vec& h, const Vec& mu) const {
  if (h.size() != obs_dim() || mu.size() != param_dim()) {
    std::ostringstream os;
    os << to_string(kind_) << ": expected h in R^" << obs_dim() << " and mu in R^" << param_dim()
       << ", got " << h.size() << " and " << mu.size();
    throw InvalidArgument(os.str());
  }
}

PhiEval RegularData::eval(const Vec& h, const Vec& mu, unsigned need) const {
  check(h, mu);
  return phi_->evaluate(h, mu, need);
}

double RegularData::phi(const Vec& h, const Vec& mu) const { return eval(h, mu, kValue).value; }
Vec RegularData::grad_h(const Vec& h, const Vec& mu) const { return eval(h, mu, kGradH).grad_h; }
Vec RegularData::grad_mu(const Vec& h, const Vec& mu) const {
  return eval(h, mu, kGradMu).grad_mu;
}

RegularData RegularData::with_param_set(SetPtr m) const {
  if (!m || m->dim() != param_dim()) throw InvalidArgument("with_param_set: dimension mismatch");
  return RegularData(h_, std::move(m), phi_, kind_);
}

std::vector<Vec> probe_points(const ConvexSet& s, int count, double scale) {
  CounterRng rng(0x5eed5eedULL, static_cast<std::uint64_t>(s.dim()));
  std::vector<Vec> out;
  out.reserve(count);
  out.push_back(s.project(Vec::Zero(s.dim())));
  for (int k = 1; k < count; ++k) {
    Vec x(s.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = scale * rng.normal();
    out.push_back(s.project(x));
  }
  return out;
}

namespace {

// ---- sub-Gaussian: mu = [theta; vec(Theta)]

class SubGaussianPhi final : public PhiOracle {
 public:
  explicit SubGaussianPhi(Eigen::Index d) : d_(d) {}
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    Eigen::Map<const Mat> cov(mu.data() + d_, d_, d_);
    Vec sh = 0.5 * (cov * h + cov.transpose() * h);
    PhiEval r;
    r.value = mu.head(d_).dot(h) + 0.5 * h.dot(sh);
    if (need & kGradH) r.grad_h = mu.head(d_) + sh;
    if (need & kGradMu) {
      r.grad_mu.resize(d_ + d_ * d_);
      r.grad_mu.head(d_) = h;
      Eigen::Map<Mat>(r.grad_mu.data() + d_, d_, d_) = 0.5 * h * h.transpose();
    }
    return r;
  }
  bool affine_in_mu() const override { return true; }

 private:
  Eigen::Index d_;
};

class PoissonPhi final : public PhiOracle {
 public:
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    if (mu.minCoeff() < -1e-12) throw InvalidParameter("poisson: negative intensity");
    Vec m = mu.cwiseMax(0.0);
    Vec em1 = h.unaryExpr([](double t) { return std::expm1(t); });
    PhiEval r;
    r.value = m.dot(em1);
    if (need & kGradH) r.grad_h = m.cwiseProduct(h.array().exp().matrix());
    if (need & kGradMu) r.grad_mu = em1;
    return r;
  }
  bool affine_in_mu() const override { return true; }
};

void check_simplex_point(const Vec& mu, const char* who) {
  if (std::abs(mu.sum() - 1.0) > 1e-9 || mu.minCoeff() < -1e-12) {
    std::ostringstream os;
    os << who << ": parameter off the probability simplex (sum " << mu.sum() << ", min "
       << mu.minCoeff() << ")";
    throw InvalidParameter(os.str());
  }
}

class DiscretePhi final : public PhiOracle {
 public:
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    check_simplex_point(mu, "discrete");
    Vec m = mu.cwiseMax(0.0);
    double top = -INFINITY;
    for (Eigen::Index i = 0; i < h.size(); ++i)
      if (m(i) > 0.0) top = std::max(top, h(i));
    // zero-mass coordinates may sit far above top; clamp so 0 * e stays 0
    Vec e = (h.array() - top).min(700.0).exp().matrix();
    double s = m.dot(e);
    PhiEval r;
    r.value = top + std::log(s);
    if (need & kGradH) r.grad_h = m.cwiseProduct(e) / s;
    // d/dmu_i ln(sum mu e^h) = e^{h_i} / sum
    if (need & kGradMu) r.grad_mu = e / s;
    return r;
  }
};

class BoundedSupportPhi final : public PhiOracle {
 public:
  explicit BoundedSupportPhi(SetPtr x) : x_(std::move(x)) {}
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    Vec p = x_->support_point(h);
    Vec q = x_->support_point(-h);
    Vec w = p - q;
    double s = h.dot(w);
    PhiEval r;
    r.value = h.dot(mu) + 0.125 * s * s;
    if (need & kGradH) r.grad_h = mu + 0.25 * s * w;
    if (need & kGradMu) r.grad_mu = h;
    return r;
  }
  bool affine_in_mu() const override { return true; }
  bool smooth_in_h() const override { return x_->is_singleton(); }

 private:
  SetPtr x_;
};

}  // namespace

Vec sub_gaussian_param(const Vec& theta, const Mat& cov) {
  if (cov.rows() != theta.size() || cov.cols() != theta.size())
    throw InvalidArgument("sub_gaussian_param: covariance must be " +
                          std::to_string(theta.size()) + "x" + std::to_string(theta.size()) +
                          ", got " + shape_str(cov));
  Vec out(theta.size() + cov.size());
  out.head(theta.size()) = theta;
  out.tail(cov.size()) = vec(cov);
  return out;
}

RegularData sub_gaussian_family(SetPtr m) {
  if (!m) throw InvalidArgument("sub_gaussian_family: null parameter set");
  Eigen::Index n = m->dim();
  // n = d + d^2
  Eigen::Index d = static_cast<Eigen::Index>(std::llround((std::sqrt(1.0 + 4.0 * n) - 1.0) / 2.0));
  if (d < 1 || d + d * d != n)
    throw InvalidArgument("sub_gaussian_family: parameter dimension " + std::to_string(n) +
                          " is not d + d^2");
  for (const Vec& p : probe_points(*m)) {
    Mat cov = unvec(p, d, d);
    if ((cov - cov.transpose()).norm() > 1e-8 * (1.0 + cov.norm()) ||
        !is_psd(sym(cov), 1e-9 * (1.0 + cov.norm())))
      throw InvalidParameter("sub_gaussian_family: parameter set contains a covariance that is "
                             "not symmetric positive semidefinite");
  }
  return RegularData(whole_space(d), std::move(m), std::make_shared<SubGaussianPhi>(d),
                     FamilyKind::sub_gaussian);
}

RegularData sub_gaussian_family(SetPtr means, SetPtr covariances) {
  if (!means || !covariances) throw InvalidArgument("sub_gaussian_family: null set");
  Eigen::Index d = means->dim();
  if (covariances->dim() != d * d)
    throw InvalidArgument("sub_gaussian_family: covariance set has dimension " +
                          std::to_string(covariances->dim()) + ", expected " +
                          std::to_string(d * d));
  return sub_gaussian_family(std::make_shared<ProductSet>(std::vector<SetPtr>{means, covariances}));
}

RegularData poisson_family(SetPtr m) {
  if (!m) throw InvalidArgument("poisson_family: null parameter set");
  for (const Vec& p : probe_points(*m))
    if (p.minCoeff() < -1e-12)
      throw InvalidParameter("poisson_family: parameter set contains negative intensities");
  Eigen::Index d = m->dim();
  return RegularData(whole_space(d), std::move(m), std::make_shared<PoissonPhi>(),
                     FamilyKind::poisson);
}

RegularData discrete_family(SetPtr m) {
  if (!m) throw InvalidArgument("discrete_family: null parameter set");
  for (const Vec& p : probe_points(*m)) check_simplex_point(p, "discrete_family");
  Eigen::Index d = m->dim();
  return RegularData(whole_space(d), std::move(m), std::make_shared<DiscretePhi>(),
                     FamilyKind::discrete);
}

RegularData bounded_support_family(SetPtr x, SetPtr m) {
  if (!x || !m) throw InvalidArgument("bounded_support_family: null set");
  if (x->dim() != m->dim())
    throw InvalidArgument("bounded_support_family: support and mean sets differ in dimension");
  if (!x->has_support() || !x->bound_radius())
    throw CapabilityError("bounded_support_family: support set needs a support function and "
                          "must be bounded (" + x->describe() + ")");
  for (const Vec& p : probe_points(*m))
    if (!x->contains(p, 1e-7))
      throw InvalidArgument("bounded_support_family: mean set is not inside the support set");
  Eigen::Index d = m->dim();
  return RegularData(whole_space(d), std::move(m), std::make_shared<BoundedSupportPhi>(x),
                     FamilyKind::bounded_support);
}

}  // namespace dforge
