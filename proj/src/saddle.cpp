#include "dforge/saddle.hpp"

#include <algorithm>
#include <cmath>

#include "dforge/optim.hpp"
#include "dforge/rng.hpp"

namespace dforge {

namespace {

// Largest primal dimension for which the ellipsoid method is used as the
// certifying phase.
constexpr Eigen::Index kEllipsoidMaxDim = 12;

double rel_scale(double v) { return std::max(1.0, std::abs(v)); }

// H ∩ (a compact neighbourhood of radius r), keeping product structure so
// that projections stay cheap.
SetPtr truncate(const SetPtr& s, double r) {
  if (auto b = s->bound_radius(); b && *b <= r) return s;
  if (s->is_whole_space()) return ball(Vec::Zero(s->dim()), r);
  if (auto p = std::dynamic_pointer_cast<const ProductSet>(s)) {
    std::vector<SetPtr> parts;
    for (const auto& q : p->parts()) parts.push_back(truncate(q, r));
    return std::make_shared<ProductSet>(parts);
  }
  if (auto bx = std::dynamic_pointer_cast<const Box>(s)) {
    return box(bx->lo().cwiseMax(-r).cwiseMin(r), bx->hi().cwiseMin(r).cwiseMax(-r));
  }
  return std::make_shared<IntersectionSet>(std::vector<SetPtr>{s, ball(Vec::Zero(s->dim()), r)});
}

bool touches(const ConvexSet& s, const Vec& h, double r) {
  const double edge = r * (1.0 - 1e-6);
  if (auto b = s.bound_radius(); b && *b <= r) return false;
  if (auto p = dynamic_cast<const ProductSet*>(&s)) {
    for (std::size_t i = 0; i < p->parts().size(); ++i) {
      const auto& q = p->parts()[i];
      if (touches(*q, h.segment(p->offsets()[i], q->dim()), r)) return true;
    }
    return false;
  }
  if (auto bx = dynamic_cast<const Box*>(&s)) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      if (!std::isfinite(bx->hi()(i)) && h(i) >= edge) return true;
      if (!std::isfinite(bx->lo()(i)) && h(i) <= -edge) return true;
    }
    return false;
  }
  return h.norm() >= edge;
}

bool same_set(const SetPtr& a, const SetPtr& b) {
  if (a == b) return true;
  if (a->dim() != b->dim()) return false;
  if (a->is_whole_space() && b->is_whole_space()) return true;
  for (const Vec& p : probe_points(*a, 16, 3.0))
    if (!b->contains(p, 1e-7)) return false;
  for (const Vec& p : probe_points(*b, 16, 3.0))
    if (!a->contains(p, 1e-7)) return false;
  return true;
}

struct InnerMin {
  Vec h;
  double value = 0.0;
  double lower = 0.0;
};

class Solver {
 public:
  explicit Solver(const SaddleProblem& p) : p_(p), d1_(p.data1), d2_(p.data2) {
    smooth_ = d1_.oracle()->smooth_in_h() && d2_.oracle()->smooth_in_h();
    n1_ = d1_.param_dim();
    n2_ = d2_.param_dim();
    m_ = std::make_shared<ProductSet>(std::vector<SetPtr>{d1_.M_ptr(), d2_.M_ptr()});
  }

  SaddleSolution run() {
    const SetPtr& H = d1_.H_ptr();
    auto hb = H->bound_radius();
    double r = hb ? INFINITY : p_.opt.radius;
    Eigen::Index d = d1_.obs_dim();

    Vec h0 = Vec::Zero(d);
    Vec mu0 = m_->project(Vec::Zero(n1_ + n2_));
    if (p_.opt.random_start) {
      CounterRng rng(p_.opt.seed, 0x5add1eULL);
      Vec z(n1_ + n2_);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = 3.0 * rng.normal();
      mu0 = m_->project(mu0 + z);
      for (Eigen::Index i = 0; i < d; ++i) h0(i) = rng.normal();
    }
    if (p_.opt.h0) {
      if (p_.opt.h0->size() != d) throw InvalidArgument("solve_saddle: h0 has the wrong dimension");
      h0 = *p_.opt.h0;
    }

    bool warned = false;
    std::vector<std::string> warnings;
    int used = 0;
    for (;;) {
      hr_ = std::isfinite(r) ? truncate(H, r) : H;
      h0 = hr_->project(h0);
      SaddleSolution sol = solve_truncated(h0, mu0, used);
      sol.radius = r;
      used = sol.iterations;
      if (!std::isfinite(r) || !touches(*H, sol.h_star, r)) {
        sol.warnings.insert(sol.warnings.begin(), warnings.begin(), warnings.end());
        return sol;
      }
      if (sol.sad_val < p_.opt.degenerate_value) {
        sol.degenerate = true;
        sol.certified = false;
        warnings.push_back("saddle value diverges to -infinity as the search radius grows; the "
                           "hypotheses look perfectly separable and the risk bound is not certified");
        sol.warnings.insert(sol.warnings.begin(), warnings.begin(), warnings.end());
        return sol;
      }
      if (!warned) {
        warnings.push_back("Condition A not verified: the minimiser reached the search radius " +
                           std::to_string(r) + "; enlarging");
        warned = true;
      }
      if (r >= p_.opt.radius_cap) {
        warnings.push_back("search radius cap reached; the solution is a saddle point of the "
                           "truncated problem");
        sol.warnings.insert(sol.warnings.begin(), warnings.begin(), warnings.end());
        return sol;
      }
      r = std::min(2.0 * r, p_.opt.radius_cap);
      h0 = sol.h_star;
      mu0 = join(sol.mu1_star, sol.mu2_star);
    }
  }

 private:
  Vec join(const Vec& a, const Vec& b) const {
    Vec m(n1_ + n2_);
    m << a, b;
    return m;
  }

  double psi_grad_h(const Vec& h, const Vec& mu1, const Vec& mu2, Vec* g) const {
    unsigned need = g ? unsigned(kGradH) : unsigned(kValue);
    PhiEval e1 = d1_.eval(-h, mu1, need);
    PhiEval e2 = d2_.eval(h, mu2, need);
    if (g) *g = 0.5 * (e2.grad_h - e1.grad_h);
    return 0.5 * (e1.value + e2.value);
  }

  Vec psi_grad_mu(const Vec& h, const Vec& mu1, const Vec& mu2) const {
    return 0.5 * join(d1_.eval(-h, mu1, kGradMu).grad_mu, d2_.eval(h, mu2, kGradMu).grad_mu);
  }

  CutFn set_cut(const SetPtr& s) const {
    return [s](const Vec& x, Vec* a) {
      Vec p = s->project(x);
      Vec dlt = x - p;
      if (dlt.norm() <= 1e-13 * std::max(1.0, x.norm())) return true;
      *a = dlt;
      return false;
    };
  }

  // f(x) + min over the truncated H of g'(y - x); relaxed to the bounding
  // ball when the set has no support oracle.
  double linear_lower(const Vec& x, double fx, const Vec& g) const {
    if (g.size() != x.size()) return -INFINITY;
    if (auto s = hr_->try_support_point(-g)) return fx + g.dot(*s - x);
    if (auto r = hr_->bound_radius()) return fx - g.dot(x) - *r * g.norm();
    return -INFINITY;
  }

  // min over the truncated H of Psi(.; mu1, mu2).
  InnerMin inner_min(const Vec& mu1, const Vec& mu2, const Vec& warm) const {
    SmoothFn f = [&](const Vec& h, Vec* g) { return psi_grad_h(h, mu1, mu2, g); };
    Projector proj = [&](const Vec& h) { return hr_->project(h); };
    FistaOptions fo;
    fo.gtol = 1e-13;
    FistaResult fr = fista_minimize(f, proj, warm, fo);
    if (smooth_) {
      FistaResult pr = gradient_polish(f, proj, fr.x);
      if (std::isfinite(pr.f)) fr = pr;
    }
    InnerMin out{fr.x, fr.f, linear_lower(fr.x, fr.f, fr.grad)};
    if (!smooth_ && hr_->dim() <= kEllipsoidMaxDim) {
      double rad = hr_->bound_radius().value_or(p_.opt.radius_cap);
      EllipsoidResult er = ellipsoid_minimize(f, set_cut(hr_), proj, Vec::Zero(hr_->dim()),
                                              rad * (1.0 + 1e-9) + 1e-12, fr.x);
      out.h = er.x;
      out.value = er.f;
      out.lower = std::min(er.lower, er.f);
    }
    return out;
  }

  void consider_lower(double v, const Vec& mu, const Vec& h) {
    if (v > d_best_) {
      d_best_ = v;
      mu_dual_ = mu;
      h_dual_ = h;
    }
  }

  // Keeps the h with the smallest U(h) = max_mu Psi(h; mu); its best
  // response is also tried as a dual point.
  void consider_upper(const Vec& h, int iters, SaddleSolution& sol) {
    BestResponse br = best_response(h, p_);
    sol.iterations = iters;
    if (br.value < sol.sad_val || sol.h_star.size() == 0) {
      sol.h_star = h;
      sol.sad_val = br.value;
      Vec mu = join(br.mu1, br.mu2);
      InnerMin im = inner_min(br.mu1, br.mu2, h);
      consider_lower(im.lower, mu, im.h);
    }
  }

  // The reported mu* is the best dual point found, so that
  // Psi(h; mu*) >= sad_val - gap for all h and Psi(h*; mu) <= sad_val.
  bool certified(const SaddleSolution& s) const {
    return s.sad_val - d_best_ <= p_.opt.tol * rel_scale(s.sad_val);
  }

  void finish(SaddleSolution& s) const {
    s.mu1_star = mu_dual_.head(n1_);
    s.mu2_star = mu_dual_.tail(n2_);
    s.lower = std::min(d_best_, s.sad_val);
    s.gap = std::max(0.0, s.sad_val - d_best_);
    s.certified = certified(s);
  }

  SaddleSolution solve_truncated(const Vec& h_start, const Vec& mu_start, int used) {
    SaddleSolution sol;
    sol.sad_val = INFINITY;
    d_best_ = -INFINITY;
    int iters = used;
    const int budget = p_.opt.max_iter;

    // Phase 1: projected accelerated ascent on the dual function
    // D(mu) = min_h Psi(h; mu), Danskin gradients, warm-started inner solves.
    Vec h_warm = h_start;
    if (m_->is_singleton()) {
      InnerMin im = inner_min(mu_start.head(n1_), mu_start.tail(n2_), h_warm);
      consider_lower(im.lower, mu_start, im.h);
      ++iters;
    } else {
      SmoothFn neg_d = [&](const Vec& mu, Vec* g) {
        InnerMin im = inner_min(mu.head(n1_), mu.tail(n2_), h_warm);
        h_warm = im.h;
        consider_lower(im.lower, mu, im.h);
        if (g) *g = -psi_grad_mu(im.h, mu.head(n1_), mu.tail(n2_));
        return -im.value;
      };
      FistaOptions fo;
      fo.max_iter = std::max(1, std::min(20000, budget - iters));
      fo.gtol = 1e-12;
      FistaResult fr =
          fista_minimize(neg_d, [&](const Vec& m) { return m_->project(m); }, mu_start, fo);
      iters += fr.iterations;
    }
    consider_upper(h_dual_, iters, sol);
    if (certified(sol)) {
      finish(sol);
      return sol;
    }

    // Phase 2 (low dimension): ellipsoid method on the primal function
    // U(h) = max_mu Psi(h; mu); its cuts certify a lower bound on min U.
    Eigen::Index d = hr_->dim();
    if (d <= kEllipsoidMaxDim && hr_->bound_radius()) {
      SmoothFn u = [&](const Vec& h, Vec* g) {
        BestResponse br = best_response(h, p_);
        if (g) psi_grad_h(h, br.mu1, br.mu2, g);
        return br.value;
      };
      EllipsoidOptions eo;
      eo.rel_tol = 0.25 * p_.opt.tol;
      eo.max_iter = std::max(1, std::min(400 + 400 * static_cast<int>(d * d), budget - iters));
      EllipsoidResult er =
          ellipsoid_minimize(u, set_cut(hr_), [&](const Vec& h) { return hr_->project(h); },
                             Vec::Zero(d), *hr_->bound_radius() * (1.0 + 1e-9) + 1e-12, sol.h_star, eo);
      iters += er.iterations;
      consider_upper(er.x, iters, sol);
      if (certified(sol)) {
        finish(sol);
        return sol;
      }
    }

    // Phase 3: averaged projected subgradient descent-ascent, step c / sqrt(t).
    Vec h = sol.h_star;
    Vec mu = mu_dual_.size() ? mu_dual_ : mu_start;
    Vec hsum = Vec::Zero(d), musum = Vec::Zero(mu.size());
    double wsum = 0.0;
    double c = 0.0;
    for (int t = 1; iters < budget; ++t, ++iters) {
      Vec gh;
      psi_grad_h(h, mu.head(n1_), mu.tail(n2_), &gh);
      Vec gm = psi_grad_mu(h, mu.head(n1_), mu.tail(n2_));
      if (c == 0.0) c = 1.0 / std::max(1.0, std::sqrt(gh.squaredNorm() + gm.squaredNorm()));
      double step = c / std::sqrt(static_cast<double>(t));
      h = hr_->project(h - step * gh);
      mu = m_->project(mu + step * gm);
      hsum += step * h;
      musum += step * mu;
      wsum += step;
      if (t % 500 == 0) {
        Vec ha = hr_->project(hsum / wsum), ma = m_->project(musum / wsum);
        consider_upper(ha, iters, sol);
        InnerMin im = inner_min(ma.head(n1_), ma.tail(n2_), ha);
        consider_lower(im.lower, ma, im.h);
        consider_upper(im.h, iters, sol);
        if (certified(sol)) {
          finish(sol);
          return sol;
        }
      }
    }
    sol.iterations = iters;
    finish(sol);
    throw SaddleNonConvergence("solve_saddle: iteration cap reached with duality gap " +
                                   std::to_string(sol.gap) + " above tolerance",
                               sol);
  }

  const SaddleProblem& p_;
  const RegularData& d1_;
  const RegularData& d2_;
  bool smooth_ = true;
  Eigen::Index n1_ = 0, n2_ = 0;
  std::shared_ptr<ProductSet> m_;
  SetPtr hr_;
  double d_best_ = -INFINITY;
  Vec mu_dual_, h_dual_;
};

}  // namespace

SaddleProblem::SaddleProblem(RegularData d1, RegularData d2, SaddleOptions o)
    : data1(std::move(d1)), data2(std::move(d2)), opt(std::move(o)) {
  if (data1.obs_dim() != data2.obs_dim())
    throw InvalidArgument("saddle problem: observation dimensions differ (" +
                          std::to_string(data1.obs_dim()) + " vs " +
                          std::to_string(data2.obs_dim()) + ")");
  if (!same_set(data1.H_ptr(), data2.H_ptr()))
    throw InvalidArgument("saddle problem: the two families must share H");
  if (!(opt.tol > 0.0) || opt.max_iter < 1 || !(opt.radius > 0.0) || opt.radius_cap < opt.radius)
    throw InvalidArgument("saddle problem: invalid solver options");
}

double SaddleProblem::psi(const Vec& h, const Vec& mu1, const Vec& mu2) const {
  return 0.5 * (data1.phi(-h, mu1) + data2.phi(h, mu2));
}

std::pair<Vec, double> maximize_phi(const RegularData& data, const Vec& h,
                                    const std::optional<Vec>& start) {
  const ConvexSet& m = data.M();
  Vec mu0 = start ? m.project(*start) : m.project(Vec::Zero(m.dim()));
  if (m.is_singleton()) return {mu0, data.phi(h, mu0)};
  if (data.oracle()->affine_in_mu()) {
    Vec g = data.grad_mu(h, mu0);
    if (auto p = m.try_support_point(g)) return {*p, data.phi(h, *p)};
  }
  SmoothFn f = [&](const Vec& mu, Vec* g) {
    PhiEval e = data.eval(h, mu, g ? unsigned(kGradMu) : unsigned(kValue));
    if (g) *g = -e.grad_mu;
    return -e.value;
  };
  FistaOptions fo;
  fo.gtol = 1e-13;
  FistaResult r = fista_minimize(f, [&](const Vec& mu) { return m.project(mu); }, mu0, fo);
  if (!std::isfinite(r.f))
    throw NumericError("best response: parameter maximisation produced a non-finite value",
                       r.stationarity);
  return {r.x, -r.f};
}

BestResponse best_response(const Vec& h, const SaddleProblem& problem) {
  if (h.size() != problem.data1.obs_dim())
    throw InvalidArgument("best_response: h has dimension " + std::to_string(h.size()) +
                          ", expected " + std::to_string(problem.data1.obs_dim()));
  auto [m1, v1] = maximize_phi(problem.data1, -h);
  auto [m2, v2] = maximize_phi(problem.data2, h);
  return {m1, m2, 0.5 * (v1 + v2)};
}

SaddleSolution solve_saddle(const SaddleProblem& problem) {
  Solver s(problem);
  return s.run();
}

}  // namespace dforge
