#include <algorithm>
#include <cmath>

#include "dforge/errors.hpp"
#include "dforge/optim.hpp"
#include "dforge/regular_data.hpp"

namespace dforge {

namespace {

std::vector<Eigen::Index> offsets_of(const std::vector<Eigen::Index>& dims) {
  std::vector<Eigen::Index> off(dims.size() + 1, 0);
  for (std::size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

class DirectSumPhi final : public PhiOracle {
 public:
  explicit DirectSumPhi(const std::vector<RegularData>& parts) {
    std::vector<Eigen::Index> dh, dm;
    for (const auto& p : parts) {
      phis_.push_back(p.oracle());
      dh.push_back(p.obs_dim());
      dm.push_back(p.param_dim());
      affine_ = affine_ && p.oracle()->affine_in_mu();
      smooth_ = smooth_ && p.oracle()->smooth_in_h();
    }
    oh_ = offsets_of(dh);
    om_ = offsets_of(dm);
  }
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    PhiEval r;
    if (need & kGradH) r.grad_h.resize(h.size());
    if (need & kGradMu) r.grad_mu.resize(mu.size());
    for (std::size_t l = 0; l < phis_.size(); ++l) {
      Eigen::Index nh = oh_[l + 1] - oh_[l], nm = om_[l + 1] - om_[l];
      PhiEval e = phis_[l]->evaluate(h.segment(oh_[l], nh), mu.segment(om_[l], nm), need);
      r.value += e.value;
      if (need & kGradH) r.grad_h.segment(oh_[l], nh) = e.grad_h;
      if (need & kGradMu) r.grad_mu.segment(om_[l], nm) = e.grad_mu;
    }
    return r;
  }
  bool affine_in_mu() const override { return affine_; }
  bool smooth_in_h() const override { return smooth_; }

 private:
  std::vector<PhiPtr> phis_;
  std::vector<Eigen::Index> oh_, om_;
  bool affine_ = true;
  bool smooth_ = true;
};

class IidScalePhi final : public PhiOracle {
 public:
  IidScalePhi(PhiPtr inner, std::vector<double> lambda)
      : inner_(std::move(inner)), lambda_(std::move(lambda)) {}
  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    PhiEval r;
    if (need & kGradH) r.grad_h = Vec::Zero(h.size());
    if (need & kGradMu) r.grad_mu = Vec::Zero(mu.size());
    for (double l : lambda_) {
      PhiEval e = inner_->evaluate(l * h, mu, need);
      r.value += e.value;
      if (need & kGradH) r.grad_h += l * e.grad_h;
      if (need & kGradMu) r.grad_mu += e.grad_mu;
    }
    return r;
  }
  bool affine_in_mu() const override { return inner_->affine_in_mu(); }
  bool smooth_in_h() const override { return inner_->smooth_in_h(); }

 private:
  PhiPtr inner_;
  std::vector<double> lambda_;
};

class AffineImagePhi final : public PhiOracle {
 public:
  AffineImagePhi(PhiPtr inner, Mat a, Vec shift)
      : inner_(std::move(inner)), a_(std::move(a)), shift_(std::move(shift)) {}
  PhiEval evaluate(const Vec& hbar, const Vec& mu, unsigned need) const override {
    PhiEval e = inner_->evaluate(a_.transpose() * hbar, mu, need);
    e.value += shift_.dot(hbar);
    if (need & kGradH) e.grad_h = a_ * e.grad_h + shift_;
    return e;
  }
  bool affine_in_mu() const override { return inner_->affine_in_mu(); }
  bool smooth_in_h() const override { return inner_->smooth_in_h(); }

 private:
  PhiPtr inner_;
  Mat a_;  // dbar x d
  Vec shift_;
};

}  // namespace

// ---- semi-direct sum

class SemiDirectPhi final : public PhiOracle {
 public:
  SemiDirectPhi(const std::vector<RegularData>& parts, double eps) : eps_(eps) {
    std::vector<Eigen::Index> dh, dm;
    for (const auto& p : parts) {
      phis_.push_back(p.oracle());
      dh.push_back(p.obs_dim());
      dm.push_back(p.param_dim());
      smooth_ = smooth_ && p.oracle()->smooth_in_h();
    }
    oh_ = offsets_of(dh);
    om_ = offsets_of(dm);
    auto n = static_cast<Eigen::Index>(parts.size());
    simplex_ = std::make_shared<Simplex>(Vec::Constant(n, eps), Vec::Ones(n), 1.0);
  }

  Eigen::Index count() const { return static_cast<Eigen::Index>(phis_.size()); }

  // sum_l lam_l Phi_l(h^l / lam_l; mu^l) and its lambda-gradient
  // Phi_l(x) - grad Phi_l(x)' x at x = h^l / lam_l.
  double inner(const Vec& lam, const Vec& h, const Vec& mu, Vec* grad) const {
    double f = 0.0;
    if (grad) grad->resize(count());
    for (Eigen::Index l = 0; l < count(); ++l) {
      if (!(lam(l) > 0.0)) return INFINITY;
      Vec x = h.segment(oh_[l], oh_[l + 1] - oh_[l]) / lam(l);
      PhiEval e = phis_[l]->evaluate(x, mu.segment(om_[l], om_[l + 1] - om_[l]),
                                     grad ? unsigned(kGradH) : unsigned(kValue));
      f += lam(l) * e.value;
      if (grad) (*grad)(l) = e.value - e.grad_h.dot(x);
    }
    return f;
  }

  Vec weights(const Vec& h, const Vec& mu) const {
    if (count() == 1) return Vec::Ones(1);
    Vec lam0 = Vec::Constant(count(), 1.0 / count());
    if (h.squaredNorm() == 0.0) return lam0;
    FistaOptions opt;
    opt.max_iter = 5000;
    opt.gtol = 1e-10;
    FistaResult res = fista_minimize(
        [&](const Vec& lam, Vec* g) { return inner(lam, h, mu, g); },
        [&](const Vec& v) { return simplex_->project(v); }, lam0, opt);
    if (!std::isfinite(res.f))
      throw NumericError("semi_direct_sum: inner minimisation produced a non-finite value",
                         res.stationarity);
    if (res.converged) return res.x;

    // non-smooth parts: ellipsoid method on the first L-1 weights
    const Eigen::Index n = count() - 1;
    auto full = [&](const Vec& z) {
      Vec lam(count());
      lam.head(n) = z;
      lam(n) = 1.0 - z.sum();
      return lam;
    };
    SmoothFn fz = [&](const Vec& z, Vec* g) {
      Vec gl;
      double v = inner(full(z), h, mu, g ? &gl : nullptr);
      if (g) *g = gl.head(n).array() - gl(n);
      return v;
    };
    CutFn cut = [&](const Vec& z, Vec* a) {
      Eigen::Index i;
      if (z.minCoeff(&i) < eps_) {
        *a = -Vec::Unit(n, i);
        return false;
      }
      if (z.sum() > 1.0 - eps_) {
        *a = Vec::Ones(n);
        return false;
      }
      return true;
    };
    EllipsoidOptions eo;
    eo.rel_tol = 1e-10;
    EllipsoidResult er = ellipsoid_minimize(
        fz, cut, [&](const Vec& z) { return Vec(simplex_->project(full(z)).head(n)); },
        Vec::Constant(n, 1.0 / count()), std::sqrt(static_cast<double>(n)), res.x.head(n), eo);
    if (!er.converged)
      throw NumericError("semi_direct_sum: inner minimisation did not converge (gap " +
                             std::to_string(er.f - er.lower) + ")",
                         er.f - er.lower);
    return er.f < res.f ? full(er.x) : res.x;
  }

  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    Vec lam = weights(h, mu);
    PhiEval r;
    if (need & kGradH) r.grad_h.resize(h.size());
    if (need & kGradMu) r.grad_mu.resize(mu.size());
    for (Eigen::Index l = 0; l < count(); ++l) {
      Eigen::Index nh = oh_[l + 1] - oh_[l], nm = om_[l + 1] - om_[l];
      Vec x = h.segment(oh_[l], nh) / lam(l);
      PhiEval e = phis_[l]->evaluate(x, mu.segment(om_[l], nm), need);
      r.value += lam(l) * e.value;
      if (need & kGradH) r.grad_h.segment(oh_[l], nh) = e.grad_h;
      if (need & kGradMu) r.grad_mu.segment(om_[l], nm) = lam(l) * e.grad_mu;
    }
    return r;
  }
  bool smooth_in_h() const override { return smooth_; }

 private:
  std::vector<PhiPtr> phis_;
  std::vector<Eigen::Index> oh_, om_;
  double eps_;
  bool smooth_ = true;
  std::shared_ptr<Simplex> simplex_;
};

// ---- support refinement: inf_{g in G} Phi(h - g; mu) + phi_X(g)

class RefinedPhi final : public PhiOracle {
 public:
  RefinedPhi(PhiPtr inner, SetPtr x, SetPtr g)
      : inner_(std::move(inner)), x_(std::move(x)), g_(std::move(g)) {}

  double objective(const Vec& h, const Vec& mu, const Vec& g) const {
    return inner_->evaluate(h - g, mu, kValue).value + x_->support(g);
  }

  // prox of t*phi_X (Moreau: y - t Pi_X(y/t)) followed by projection on G.
  Vec prox(const Vec& y, double t) const { return g_->project(y - t * x_->project(y / t)); }

  Vec shift(const Vec& h, const Vec& mu) const {
    Vec best = Vec::Zero(h.size());
    double fbest = objective(h, mu, best);
    Vec cand = g_->project(h);
    double fc = objective(h, mu, cand);
    if (fc < fbest) {
      best = cand;
      fbest = fc;
    }
    if (g_->is_singleton()) return best;

    auto smooth = [&](const Vec& g, Vec* grad) {
      PhiEval e = inner_->evaluate(h - g, mu, grad ? unsigned(kGradH) : unsigned(kValue));
      if (grad) *grad = -e.grad_h;
      return e.value;
    };

    // accelerated proximal gradient gets close quickly when Phi is smooth
    Vec xk = best, yk = best;
    double tk = 1.0, lip = 1.0;
    int stall = 0;
    for (int it = 0; it < 300; ++it) {
      Vec gy;
      double fy = smooth(yk, &gy);
      if (!std::isfinite(fy)) break;
      Vec xn;
      for (int bt = 0; bt < 60; ++bt) {
        xn = prox(yk - gy / lip, 1.0 / lip);
        Vec dlt = xn - yk;
        double fx = smooth(xn, nullptr);
        if (std::isfinite(fx) && fx <= fy + gy.dot(dlt) + 0.5 * lip * dlt.squaredNorm() + 1e-15 * std::abs(fy))
          break;
        lip *= 2.0;
      }
      double fn = objective(h, mu, xn);
      double prev = fbest;
      if (fn < fbest) {
        fbest = fn;
        best = xn;
      }
      stall = (prev - fbest <= 1e-14 * std::max(1.0, std::abs(fbest))) ? stall + 1 : 0;
      if (stall >= 10) break;
      double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      Vec yn = xn + ((tk - 1.0) / tn) * (xn - xk);
      if ((yk - xn).dot(xn - xk) > 0.0) {
        yn = xn;
        tn = 1.0;
      }
      xk = xn;
      yk = yn;
      tk = tn;
      lip = std::max(lip * 0.5, 1e-12);
    }
    if (!std::isfinite(fbest))
      throw NumericError("refine_with_support: inner minimisation produced no finite value",
                         INFINITY);

    // ellipsoid polish: handles kinks and certifies the inner minimum
    SmoothFn full = [&](const Vec& g, Vec* sub) {
      PhiEval e = inner_->evaluate(h - g, mu, sub ? unsigned(kGradH) : unsigned(kValue));
      Vec sp = x_->support_point(g);
      if (sub) *sub = sp - e.grad_h;
      return e.value + g.dot(sp);
    };
    CutFn cut = [&](const Vec& g, Vec* a) {
      Vec p = g_->project(g);
      Vec dlt = g - p;
      if (dlt.norm() <= 1e-14 * std::max(1.0, g.norm())) return true;
      *a = dlt;
      return false;
    };
    double r = *g_->bound_radius();
    EllipsoidResult er = ellipsoid_minimize(full, cut, [&](const Vec& g) { return g_->project(g); },
                                            Vec::Zero(h.size()), r * (1.0 + 1e-9) + 1e-12, best);
    if (er.f < fbest) best = er.x;
    return best;
  }

  PhiEval evaluate(const Vec& h, const Vec& mu, unsigned need) const override {
    Vec g = shift(h, mu);
    PhiEval e = inner_->evaluate(h - g, mu, need);
    e.value += x_->support(g);
    return e;
  }
  bool smooth_in_h() const override { return false; }

 private:
  PhiPtr inner_;
  SetPtr x_, g_;
};

RegularData direct_sum(const std::vector<RegularData>& parts) {
  if (parts.empty()) throw InvalidArgument("direct_sum: empty list of parts");
  if (parts.size() == 1) return parts.front();
  std::vector<SetPtr> hs, ms;
  for (const auto& p : parts) {
    hs.push_back(p.H_ptr());
    ms.push_back(p.M_ptr());
  }
  return RegularData(product(hs), product(ms), std::make_shared<DirectSumPhi>(parts),
                     FamilyKind::direct_sum);
}

RegularData iid_scale(const RegularData& data, const std::vector<double>& lambda) {
  if (lambda.empty()) throw InvalidArgument("iid_scale: empty weight list");
  double s = 0.0;
  for (double l : lambda) {
    if (!std::isfinite(l)) throw InvalidArgument("iid_scale: non-finite weight");
    s = std::max(s, std::abs(l));
  }
  SetPtr h;
  if (s == 0.0 || data.H().is_whole_space())
    h = whole_space(data.obs_dim());
  else
    h = std::make_shared<ScaledSet>(data.H_ptr(), 1.0 / s);
  return RegularData(h, data.M_ptr(), std::make_shared<IidScalePhi>(data.oracle(), lambda),
                     FamilyKind::iid_scale);
}

RegularData semi_direct_sum(const std::vector<RegularData>& parts, double eps) {
  if (parts.empty()) throw InvalidArgument("semi_direct_sum: empty list of parts");
  double l = static_cast<double>(parts.size());
  if (eps <= 0.0) eps = std::min(1e-3, 1.0 / (2.0 * l));
  if (l * eps >= 1.0)
    throw InvalidArgument("semi_direct_sum: need L*eps < 1, got L=" + std::to_string(parts.size()) +
                          ", eps=" + std::to_string(eps));
  std::vector<SetPtr> ms;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!parts[i].H().is_whole_space())
      throw InvalidArgument("semi_direct_sum: part " + std::to_string(i) +
                            " must have H equal to the whole space");
    if (!parts[i].M().bound_radius())
      throw InvalidArgument("semi_direct_sum: part " + std::to_string(i) +
                            " must have a bounded parameter set");
    ms.push_back(parts[i].M_ptr());
  }
  Eigen::Index d = 0;
  for (const auto& p : parts) d += p.obs_dim();
  return RegularData(whole_space(d), product(ms), std::make_shared<SemiDirectPhi>(parts, eps),
                     FamilyKind::semi_direct_sum);
}

Vec semi_direct_weights(const RegularData& semi, const Vec& h, const Vec& mu) {
  auto p = std::dynamic_pointer_cast<const SemiDirectPhi>(semi.oracle());
  if (!p) throw InvalidArgument("semi_direct_weights: data is not a semi-direct sum");
  if (h.size() != semi.obs_dim() || mu.size() != semi.param_dim())
    throw InvalidArgument("semi_direct_weights: dimension mismatch");
  return p->weights(h, mu);
}

RegularData affine_image(const RegularData& data, const Mat& a, const Vec& shift) {
  if (a.cols() != data.obs_dim() || shift.size() != a.rows())
    throw InvalidArgument("affine_image: A is " + shape_str(a) + " and a has length " +
                          std::to_string(shift.size()) + "; expected A with " +
                          std::to_string(data.obs_dim()) + " columns and a with A.rows() entries");
  SetPtr h;
  if (data.H().is_whole_space())
    h = whole_space(a.rows());
  else
    h = std::make_shared<PreimageSet>(data.H_ptr(), a);
  return RegularData(h, data.M_ptr(), std::make_shared<AffineImagePhi>(data.oracle(), a, shift),
                     FamilyKind::affine_image);
}

RegularData refine_with_support(const RegularData& data, SetPtr x, SetPtr g) {
  if (!x || !g) throw InvalidArgument("refine_with_support: null set");
  if (!data.H().is_whole_space())
    throw InvalidArgument("refine_with_support: H must be the whole space");
  if (x->dim() != data.obs_dim() || g->dim() != data.obs_dim())
    throw InvalidArgument("refine_with_support: set dimensions must equal the observation dimension");
  if (!x->has_support())
    throw CapabilityError("refine_with_support: support set has no support function (" +
                          x->describe() + ")");
  if (!g->bound_radius()) throw InvalidArgument("refine_with_support: G must be bounded");
  if (!g->contains(Vec::Zero(g->dim()), 1e-9))
    throw InvalidArgument("refine_with_support: G must contain the origin");
  return RegularData(data.H_ptr(), data.M_ptr(),
                     std::make_shared<RefinedPhi>(data.oracle(), std::move(x), std::move(g)),
                     FamilyKind::support_refined);
}

Vec refine_shift(const RegularData& refined, const Vec& h, const Vec& mu) {
  auto p = std::dynamic_pointer_cast<const RefinedPhi>(refined.oracle());
  if (!p) throw InvalidArgument("refine_shift: data is not support-refined");
  if (h.size() != refined.obs_dim() || mu.size() != refined.param_dim())
    throw InvalidArgument("refine_shift: dimension mismatch");
  return p->shift(h, mu);
}

}  // namespace dforge
