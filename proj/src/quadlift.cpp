#include "dforge/quadlift.hpp"

#include <cmath>
#include <sstream>

#include "dforge/convex_set.hpp"
#include "dforge/kernels.hpp"
#include "dforge/optim.hpp"
#include "dforge/rng.hpp"

namespace dforge {

namespace {

bool scalar_multiple(const Mat& m, double* s) {
  if (m.rows() != m.cols()) return false;
  double c = m.trace() / static_cast<double>(m.rows());
  double scale = std::max(1.0, std::abs(c));
  if ((m - c * Mat::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() > 1e-14 * scale) return false;
  *s = c;
  return true;
}

Mat rank_one_lift(const Vec& x) {
  Vec e(x.size() + 1);
  e.head(x.size()) = x;
  e(x.size()) = 1.0;
  return e * e.transpose();
}

}  // namespace

// ------------------------------------------------------------------ LiftZ

std::shared_ptr<const LiftZ> LiftZ::shor(std::vector<Mat> constraints) {
  if (constraints.empty()) throw InvalidArgument("LiftZ::shor: no constraints");
  const Eigen::Index side = constraints[0].rows();
  if (side < 2) throw InvalidArgument("LiftZ::shor: constraint matrices must be at least 2x2");
  std::shared_ptr<LiftZ> z(new LiftZ());
  z->m_ = side - 1;
  z->ul_sum_ = Mat::Zero(z->m_, z->m_);
  for (Mat& c : constraints) {
    if (c.rows() != side || c.cols() != side)
      throw InvalidArgument("LiftZ::shor: constraint is " + shape_str(c) + ", expected " +
                            std::to_string(side) + "x" + std::to_string(side));
    c = sym(c);
    z->ul_sum_ += c.topLeftCorner(z->m_, z->m_);
  }
  if (min_eigenvalue(z->ul_sum_) <= 1e-12 * std::max(1.0, z->ul_sum_.cwiseAbs().maxCoeff()))
    throw InvalidArgument("LiftZ::shor: the upper-left blocks must sum to a positive definite "
                          "matrix (relaxation would be unbounded)");
  z->c_ = std::move(constraints);
  z->name_ = "Shor relaxation with " + std::to_string(z->c_.size()) + " quadratic constraints";
  return z;
}

std::shared_ptr<const LiftZ> LiftZ::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InvalidArgument("LiftZ::box: bounds must be nonempty and of equal length");
  if (!lo.allFinite() || !hi.allFinite() || (hi - lo).minCoeff() < 0.0)
    throw InvalidArgument("LiftZ::box: need finite bounds with lo <= hi");
  const Eigen::Index m = lo.size();
  std::vector<Mat> cs;
  for (Eigen::Index i = 0; i < m; ++i) {
    Mat c = Mat::Zero(m + 1, m + 1);
    c(i, i) = 1.0;
    c(i, m) = c(m, i) = -0.5 * (lo(i) + hi(i));
    c(m, m) = lo(i) * hi(i);
    cs.push_back(c);
  }
  auto z = shor(std::move(cs));
  std::const_pointer_cast<LiftZ>(z)->name_ = "Shor relaxation of a box in R^" + std::to_string(m);
  return z;
}

std::shared_ptr<const LiftZ> LiftZ::ball(const Vec& c, double r) {
  if (c.size() == 0 || !(r >= 0.0)) throw InvalidArgument("LiftZ::ball: bad centre or radius");
  const Eigen::Index m = c.size();
  Mat q = Mat::Zero(m + 1, m + 1);
  q.topLeftCorner(m, m).setIdentity();
  q.col(m).head(m) = -c;
  q.row(m).head(m) = -c.transpose();
  q(m, m) = c.squaredNorm() - r * r;
  auto z = shor({q});
  std::const_pointer_cast<LiftZ>(z)->name_ = "Shor relaxation of a ball in R^" + std::to_string(m);
  return z;
}

std::shared_ptr<const LiftZ> LiftZ::oracle(Eigen::Index m, ZOracle fn, std::string name) {
  if (m < 1 || !fn) throw InvalidArgument("LiftZ::oracle: need m >= 1 and a callable");
  std::shared_ptr<LiftZ> z(new LiftZ());
  z->m_ = m;
  z->oracle_ = std::move(fn);
  z->name_ = std::move(name);
  return z;
}

std::shared_ptr<const LiftZ> LiftZ::from_set(const ConvexSet& u) {
  if (auto b = dynamic_cast<const Box*>(&u)) return box(b->lo(), b->hi());
  if (auto b = dynamic_cast<const Ball*>(&u)) return ball(b->center(), b->radius());
  if (auto s = dynamic_cast<const Singleton*>(&u)) return box(s->point(), s->point());
  throw CapabilityError("LiftZ::from_set: no built-in relaxation for " + u.describe() +
                        "; supply Z explicitly");
}

std::string LiftZ::describe() const { return name_; }

LiftZ::Dual LiftZ::dual(const Vec& lambda, const Mat& w) const {
  Dual out;
  Mat n = w;
  for (std::size_t k = 0; k < c_.size(); ++k) n -= lambda(static_cast<Eigen::Index>(k)) * c_[k];
  Mat mm = -n.topLeftCorner(m_, m_);
  Eigen::LLT<Mat> llt(mm);
  if (llt.info() != Eigen::Success) return out;
  Vec q = n.col(m_).head(m_);
  out.x = llt.solve(q);
  // LLT accepts some semidefinite inputs; insist on a positive pivot
  if (!out.x.allFinite() || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) return out;
  out.value = n(m_, m_) + q.dot(out.x);
  out.grad_lambda.resize(static_cast<Eigen::Index>(c_.size()));
  Vec e(m_ + 1);
  e.head(m_) = out.x;
  e(m_) = 1.0;
  for (std::size_t k = 0; k < c_.size(); ++k)
    out.grad_lambda(static_cast<Eigen::Index>(k)) = -e.dot(c_[k] * e);
  return out;
}

Vec LiftZ::dual_start(const Mat& w) const {
  Mat p = sym(w).topLeftCorner(m_, m_);
  Mat si = inv_sqrtm_psd(ul_sum_);
  double t0 = max_eigenvalue(sym(si * p * si));
  double scale = 1.0 + w.cwiseAbs().maxCoeff();
  double t = std::max(t0, 0.0) * 1.5 + 1e-2 * scale;
  return Vec::Constant(static_cast<Eigen::Index>(c_.size()), t);
}

LiftZ::Dual LiftZ::min_dual(const Mat& w0, Vec* lambda_io) const {
  if (!is_shor()) throw CapabilityError("LiftZ::min_dual: oracle relaxation has no dual form");
  const Mat w = sym(w0);
  const Eigen::Index p = static_cast<Eigen::Index>(c_.size());
  Vec lam;
  if (lambda_io && lambda_io->size() == p && lambda_io->minCoeff() >= 0.0 &&
      std::isfinite(dual(*lambda_io, w).value))
    lam = *lambda_io;
  else
    lam = dual_start(w);
  Dual cur = dual(lam, w);
  if (!std::isfinite(cur.value)) throw NumericError("LiftZ::min_dual: no feasible start", INFINITY);
  for (int it = 0; it < 200; ++it) {
    const Vec& g = cur.grad_lambda;
    Vec pg = lam - (lam - g).cwiseMax(0.0);
    if (pg.norm() <= 1e-13 * (1.0 + std::abs(cur.value) + g.norm())) break;
    // Hessian 2 J' M^{-1} J with J_k = C_k^{ul} x + C_k^{q}
    Mat n = w;
    for (Eigen::Index k = 0; k < p; ++k) n -= lam(k) * c_[static_cast<std::size_t>(k)];
    Mat mm = -n.topLeftCorner(m_, m_);
    Eigen::LLT<Mat> llt(mm);
    Mat j(m_, p);
    for (Eigen::Index k = 0; k < p; ++k) {
      const Mat& c = c_[static_cast<std::size_t>(k)];
      j.col(k) = c.topLeftCorner(m_, m_) * cur.x + c.col(m_).head(m_);
    }
    Mat hess = 2.0 * j.transpose() * llt.solve(j);
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < p; ++k)
      if (!(lam(k) <= 1e-14 * (1.0 + lam.maxCoeff()) && g(k) > 0.0)) free.push_back(k);
    Vec dir = Vec::Zero(p);
    if (!free.empty()) {
      const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
      Mat hf(nf, nf);
      Vec gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = g(free[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = hess(free[a], free[b]);
      }
      double damp = 1e-12 * (1.0 + hf.diagonal().cwiseAbs().maxCoeff());
      Vec df = (hf + damp * Mat::Identity(nf, nf)).ldlt().solve(-gf);
      if (!df.allFinite() || df.dot(gf) >= 0.0) df = -gf;
      for (Eigen::Index a = 0; a < nf; ++a) dir(free[a]) = df(a);
    } else {
      dir = -g;
    }
    double step = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Vec ln = (lam + step * dir).cwiseMax(0.0);
      Dual nd = dual(ln, w);
      if (std::isfinite(nd.value) && nd.value <= cur.value + 1e-4 * g.dot(ln - lam)) {
        moved = (ln - lam).norm() > 0.0;
        lam = ln;
        cur = nd;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  if (lambda_io) *lambda_io = lam;
  return cur;
}

ZSupport LiftZ::support(const Mat& w) const {
  if (w.rows() != m_ + 1 || w.cols() != m_ + 1)
    throw InvalidArgument("LiftZ::support: argument is " + shape_str(w) + ", expected " +
                          std::to_string(m_ + 1) + "x" + std::to_string(m_ + 1));
  if (oracle_) {
    ZSupport s = oracle_(sym(w));
    if (!std::isfinite(s.value) || s.maximizer.rows() != m_ + 1 || s.maximizer.cols() != m_ + 1)
      throw CapabilityError("LiftZ::support: oracle '" + name_ + "' returned an invalid result");
    return s;
  }
  Vec lam;
  Dual d = min_dual(w, &lam);
  return {d.value, rank_one_lift(d.x)};
}

bool LiftZ::contains_lift(const Vec& u, double tol) const {
  if (u.size() != m_) return false;
  Mat z = rank_one_lift(u);
  double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
  if (!oracle_) {
    for (const Mat& c : c_)
      if ((c.array() * z.array()).sum() > tol * scale * std::max(1.0, c.cwiseAbs().maxCoeff()))
        return false;
    return true;
  }
  // necessary condition: Tr(W Z(u)) <= support(W) on a few directions
  CounterRng rng(0x21f7ULL, static_cast<std::uint64_t>(m_));
  for (int k = 0; k < 8; ++k) {
    Mat w(m_ + 1, m_ + 1);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    w = sym(w);
    if ((w.array() * z.array()).sum() > support(w).value + tol * scale * (1.0 + w.norm()))
      return false;
  }
  return true;
}

// --------------------------------------------------------- lift context

double compute_delta(const ConvexSet& ucov, const Mat& theta_star) {
  const Eigen::Index d = theta_star.rows();
  if (theta_star.cols() != d || ucov.dim() != d * d)
    throw InvalidArgument("compute_delta: Theta* is " + shape_str(theta_star) +
                          " but the covariance set has dimension " + std::to_string(ucov.dim()));
  if (min_eigenvalue(sym(theta_star)) <= 0.0)
    throw InvalidParameter("compute_delta: Theta* must be positive definite");
  Mat ti = inv_sqrtm_psd(sym(theta_star));
  auto at = [&](const Mat& th) {
    Mat r = sqrtm_psd(sym(th)) * ti - Mat::Identity(d, d);
    return std::min(2.0, spectral_norm(r));
  };
  if (ucov.is_singleton()) return at(unvec(ucov.project(Vec::Zero(d * d)), d));
  double c = 0.0;
  if (auto pi = dynamic_cast<const PsdInterval*>(&ucov); pi && scalar_multiple(theta_star, &c)) {
    double lo = 0.0, hi = 0.0;
    if (!pi->upper() || !scalar_multiple(*pi->upper(), &hi)) return 2.0;
    if (pi->lower() && !scalar_multiple(*pi->lower(), &lo)) return 2.0;
    lo = std::max(lo, 0.0);
    hi = std::max(hi, 0.0);
    return std::min(2.0, std::max(std::abs(std::sqrt(lo / c) - 1.0), std::abs(std::sqrt(hi / c) - 1.0)));
  }
  return 2.0;
}

LiftContext make_lift_context(const QuadLiftSpec& s) {
  LiftContext ctx;
  ctx.spec = s;
  const Eigen::Index d = s.A.rows();
  if (d < 1 || s.A.cols() < 2)
    throw InvalidArgument("quad lift: A must be d x (m+1) with d, m >= 1, got " + shape_str(s.A));
  const Eigen::Index m = s.A.cols() - 1;
  ctx.d = d;
  ctx.m = m;
  if (!s.U || s.U->dim() != m)
    throw InvalidArgument("quad lift: U must be a set in R^" + std::to_string(m));
  if (!s.U->bound_radius()) throw InvalidArgument("quad lift: U must be bounded (" + s.U->describe() + ")");
  if (!s.Ucov || s.Ucov->dim() != d * d)
    throw InvalidArgument("quad lift: covariance set must live in R^" + std::to_string(d * d));
  if (s.theta_star.rows() != d || s.theta_star.cols() != d)
    throw InvalidArgument("quad lift: Theta* is " + shape_str(s.theta_star) + ", expected " +
                          std::to_string(d) + "x" + std::to_string(d));
  Mat ts = sym(s.theta_star);
  if ((ts - s.theta_star).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, ts.cwiseAbs().maxCoeff()) ||
      min_eigenvalue(ts) <= 0.0)
    throw InvalidParameter("quad lift: Theta* must be symmetric positive definite");
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) throw InvalidArgument("quad lift: gamma must lie in (0, 1)");
  double tscale = std::max(1.0, ts.cwiseAbs().maxCoeff());
  for (const Vec& p : probe_points(*s.Ucov)) {
    Mat th = unvec(p, d);
    if (!is_psd(sym(th), 1e-9 * tscale))
      throw InvalidParameter("quad lift: covariance set contains a matrix that is not psd");
    if (!is_psd(sym(ts - th), 1e-9 * tscale))
      throw InvalidParameter("quad lift: Theta* does not dominate the covariance set");
  }
  ctx.delta = compute_delta(*s.Ucov, ts);
  if (s.delta) {
    if (!(*s.delta >= 0.0 && *s.delta <= 2.0)) throw InvalidArgument("quad lift: delta must lie in [0, 2]");
    if (*s.delta + 1e-9 < ctx.delta) {
      // a caller value below our bound must still hold on every probe
      Mat ti = inv_sqrtm_psd(ts);
      for (const Vec& p : probe_points(*s.Ucov)) {
        double v = spectral_norm(sqrtm_psd(sym(unvec(p, d))) * ti - Mat::Identity(d, d));
        if (v > *s.delta + 1e-9)
          throw InvalidParameter("quad lift: delta is violated by a covariance in the set");
      }
    }
    ctx.delta = *s.delta;
  }
  ctx.frob_coef = ctx.delta * (2.0 + ctx.delta) / (2.0 * (1.0 - s.gamma));
  ctx.T = sqrtm_psd(ts);
  ctx.T_inv = inv_sqrtm_psd(ts);
  ctx.theta_inv = sym(ctx.T_inv * ctx.T_inv);
  ctx.Z = s.Z ? s.Z : LiftZ::from_set(*s.U);
  if (ctx.Z->m() != m)
    throw InvalidArgument("quad lift: Z relaxes R^" + std::to_string(ctx.Z->m()) + ", U lives in R^" +
                          std::to_string(m));
  for (const Vec& u : probe_points(*s.U))
    if (!ctx.Z->contains_lift(u, 1e-7))
      throw InvalidArgument("quad lift: Z does not contain Z(u) for some u in U");
  ctx.spec.theta_star = ts;
  return ctx;
}

Mat project_h_gamma(const Mat& h, const Mat& theta_star, double gamma) {
  if (h.rows() != theta_star.rows() || h.cols() != theta_star.cols() || h.rows() != h.cols())
    throw InvalidArgument("project_h_gamma: H is " + shape_str(h) + ", Theta* is " + shape_str(theta_star));
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("project_h_gamma: gamma must lie in (0, 1)");
  Mat t = sqrtm_psd(sym(theta_star));
  Mat ti = inv_sqrtm_psd(sym(theta_star));
  Mat ht = clip_spectrum(sym(t * sym(h) * t), -gamma, gamma);
  return sym(ti * ht * ti);
}

Mat lift_q_matrix(const LiftContext& ctx, const Vec& h, const Mat& hm) {
  const Eigen::Index d = ctx.d, m = ctx.m;
  Mat b(d + 1, m + 1);
  b.topRows(d) = ctx.spec.A;
  b.row(d).setZero();
  b(d, m) = 1.0;
  Mat k = Mat::Zero(d + 1, d + 1);
  k.topLeftCorner(d, d) = hm;
  k.col(d).head(d) = h;
  k.row(d).head(d) = h.transpose();
  Mat s(d, d + 1);
  s.leftCols(d) = hm;
  s.col(d) = h;
  Mat r = (ctx.theta_inv - hm).inverse();
  return sym(b.transpose() * (k + s.transpose() * r * s) * b);
}

namespace {

// Value and gradient pieces of Phi at (h, H; Theta) for a given maximiser
// matrix Zm of the Gamma term.
struct LiftEval {
  double value = INFINITY;
  Vec grad_h;
  Mat grad_H;
  Vec x;  // Shor dual point when available
  Vec grad_lambda;
};

// Gradient of Tr(Y (K + S'RS)) / 2 with Y = B Zm B'.
void gamma_gradient(const LiftContext& ctx, const Mat& zm, const Vec& h, const Mat& hm, const Mat& r,
                    Vec* gh, Mat* gH) {
  const Eigen::Index d = ctx.d, m = ctx.m;
  Mat b(d + 1, m + 1);
  b.topRows(d) = ctx.spec.A;
  b.row(d).setZero();
  b(d, m) = 1.0;
  Mat y = b * sym(zm) * b.transpose();
  Mat s(d, d + 1);
  s.leftCols(d) = hm;
  s.col(d) = h;
  Mat rn = r * s * y;
  *gh = y.col(d).head(d) + rn.col(d);
  *gH = sym(0.5 * y.topLeftCorner(d, d) + sym(rn.leftCols(d)) + 0.5 * r * s * y * s.transpose() * r);
}

// Phi(h, H; Theta) with Gamma from an exact support call (need_grad
// requests gradients in (h, H)).
LiftEval eval_lift(const LiftContext& ctx, const Vec& h, const Mat& hm0, const Mat& theta, bool need_grad) {
  LiftEval out;
  const Eigen::Index d = ctx.d;
  Mat hm = sym(hm0);
  Mat ht = sym(ctx.T * hm * ctx.T);
  double rad = spectral_norm(ht);
  if (rad > ctx.spec.gamma * (1.0 + 1e-9) + 1e-12) {
    std::ostringstream os;
    os << "lifted Phi: H outside the domain (spectral radius " << rad << " > gamma " << ctx.spec.gamma << ")";
    throw DomainError(os.str());
  }
  Mat id = Mat::Identity(d, d);
  Eigen::LLT<Mat> llt(id - ht);
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  Mat r = ctx.T * llt.solve(id) * ctx.T;
  Mat q = lift_q_matrix(ctx, h, hm);
  ZSupport zs = ctx.Z->support(q);
  out.value = -0.5 * logdet + 0.5 * ((theta - ctx.spec.theta_star).cwiseProduct(hm)).sum() +
              ctx.frob_coef * ht.squaredNorm() + 0.5 * zs.value;
  if (need_grad) {
    Vec gh;
    Mat gH;
    gamma_gradient(ctx, zs.maximizer, h, hm, r, &gh, &gH);
    out.grad_h = gh;
    out.grad_H = sym(0.5 * r + 0.5 * (theta - ctx.spec.theta_star) +
                     2.0 * ctx.frob_coef * ctx.spec.theta_star * hm * ctx.spec.theta_star + gH);
  }
  return out;
}

class LiftedGaussianPhi final : public PhiOracle {
 public:
  explicit LiftedGaussianPhi(LiftContext ctx) : ctx_(std::move(ctx)) {}
  PhiEval evaluate(const Vec& x, const Vec& mu, unsigned need) const override {
    const Eigen::Index d = ctx_.d;
    Vec h = x.head(d);
    Mat hm = unvec(x, d, d);
    Mat theta = sym(unvec(mu, d));
    LiftEval e = eval_lift(ctx_, h, hm, theta, need & kGradH);
    PhiEval r;
    r.value = e.value;
    if (need & kGradH) {
      r.grad_h.resize(d + d * d);
      r.grad_h.head(d) = e.grad_h;
      r.grad_h.tail(d * d) = vec(e.grad_H);
    }
    if (need & kGradMu) r.grad_mu = 0.5 * vec(sym(hm));
    return r;
  }
  bool affine_in_mu() const override { return true; }
  bool smooth_in_h() const override { return false; }

 private:
  LiftContext ctx_;
};

}  // namespace

double lifted_phi(const LiftContext& ctx, const Vec& h, const Mat& hm, const Mat& theta) {
  if (h.size() != ctx.d || hm.rows() != ctx.d || hm.cols() != ctx.d || theta.rows() != ctx.d ||
      theta.cols() != ctx.d)
    throw InvalidArgument("lifted_phi: dimension mismatch");
  return eval_lift(ctx, h, hm, theta, false).value;
}

RegularData lift_gaussian(const QuadLiftSpec& spec) {
  LiftContext ctx = make_lift_context(spec);
  const Eigen::Index d = ctx.d;
  Mat bound = ctx.spec.gamma * ctx.theta_inv;
  SetPtr hset = product({whole_space(d), std::make_shared<PsdInterval>(Mat(-bound), bound)});
  SetPtr ucov = ctx.spec.Ucov;
  return RegularData(std::move(hset), std::move(ucov), std::make_shared<LiftedGaussianPhi>(std::move(ctx)),
                     FamilyKind::quad_lift_gaussian);
}

Vec lift_observation(const Vec& zeta) {
  const Eigen::Index d = zeta.size();
  Vec out(d + d * d);
  out.head(d) = zeta;
  out.tail(d * d) = 0.5 * vec(zeta * zeta.transpose());
  return out;
}

// ------------------------------------------------------------ detector

double QuadDetector::operator()(const Vec& zeta) const {
  if (zeta.size() != h.size()) throw InvalidArgument("quad detector: observation has wrong dimension");
  return h.dot(zeta) + 0.5 * zeta.dot(H * zeta) + a;
}

Vec QuadDetector::scores(const Mat& obs) const {
  if (obs.rows() != h.size()) throw InvalidArgument("quad detector: observations have wrong dimension");
  Vec out(obs.cols());
  kernels::quadratic_scores(obs.data(), obs.rows(), obs.cols(), h.data(), H.data(), a, out.data());
  return out;
}

const char* to_string(QuadMode m) {
  switch (m) {
    case QuadMode::full: return "full";
    case QuadMode::affine_only: return "affine_only";
    case QuadMode::pure_quadratic: return "pure_quadratic";
  }
  return "unknown";
}

namespace {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// vec(H) = D svec(H), svec ordered column by column over the upper triangle
Mat duplication(Eigen::Index d) {
  Mat dup = Mat::Zero(d * d, d * (d + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i <= j; ++i, ++k) {
      dup(i + j * d, k) = 1.0;
      dup(j + i * d, k) = 1.0;
    }
  return dup;
}

// z = [h; svec(H); lambda1; lambda2] (blocks absent in restricted modes) and
// f = (Phi1(-h,-H) + Phi2(h,H)) / 2 with each Gamma term replaced by its Shor
// dual at lambda, so every feasible z bounds the risk.
class PairObjective {
 public:
  PairObjective(const LiftContext& c1, const LiftContext& c2, QuadMode mode, Mat th1, Mat th2)
      : c1_(c1), c2_(c2), d_(c1.d), theta1_(std::move(th1)), theta2_(std::move(th2)) {
    nh_ = mode == QuadMode::pure_quadratic ? 0 : d_;
    nH_ = mode == QuadMode::affine_only ? 0 : d_ * (d_ + 1) / 2;
    p1_ = static_cast<Eigen::Index>(c1.Z->constraints().size());
    p2_ = static_cast<Eigen::Index>(c2.Z->constraints().size());
  }

  Eigen::Index size() const { return nh_ + nH_ + p1_ + p2_; }
  Eigen::Index first_multiplier() const { return nh_ + nH_; }
  // barrier parameter
  double nu() const { return static_cast<double>(p1_ + p2_ + c1_.m + c2_.m + (nH_ ? 4 * d_ : 0)); }

  Vec h(const Vec& z) const { return nh_ ? Vec(z.head(d_)) : Vec::Zero(d_); }
  Mat H(const Vec& z) const {
    Mat m = Mat::Zero(d_, d_);
    Eigen::Index k = nh_;
    if (nH_)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) m(i, j) = m(j, i) = z(k++);
    return m;
  }
  Vec lam1(const Vec& z) const { return z.segment(nh_ + nH_, p1_); }
  Vec lam2(const Vec& z) const { return z.tail(p2_); }

  Vec pack(const Vec& hv, const Mat& hm, const Vec& l1, const Vec& l2) const {
    Vec z(size());
    if (nh_) z.head(d_) = hv;
    Eigen::Index k = nh_;
    if (nH_)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) z(k++) = i == j ? hm(i, i) : hm(i, j);
    z.segment(nh_ + nH_, p1_) = l1;
    z.tail(p2_) = l2;
    return z;
  }
  // gradient in the full symmetric matrix -> gradient in svec coordinates
  Vec pack_grad(const Vec& gh, const Mat& gH, const Vec& l1, const Vec& l2) const {
    Vec z = pack(gh, gH, l1, l2);
    Eigen::Index k = nh_;
    if (nH_)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index i = 0; i <= j; ++i, ++k)
          if (i != j) z(k) = gH(i, j) + gH(j, i);
    return z;
  }

  struct Side {
    double value = INFINITY;
    Vec gh;
    Mat gH;
    Vec gl;
  };

  // Phi_hat at (h, H) for one context and multipliers lambda.
  Side side(const LiftContext& c, const Vec& hv, const Mat& hm, const Vec& lam, const Mat& theta,
            bool grad) const {
    Side s;
    Mat ht = sym(c.T * hm * c.T);
    Mat id = Mat::Identity(d_, d_);
    Eigen::LLT<Mat> llt(id - ht);
    if (llt.info() != Eigen::Success) return s;
    Vec diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() <= 0.0) return s;
    double logdet = 2.0 * diag.array().log().sum();
    Mat r = sym(c.T * llt.solve(id) * c.T);
    LiftZ::Dual du = c.Z->dual(lam, lift_q_matrix(c, hv, hm));
    if (!std::isfinite(du.value)) return s;
    s.value = -0.5 * logdet + 0.5 * ((theta - c.spec.theta_star).cwiseProduct(hm)).sum() +
              c.frob_coef * ht.squaredNorm() + 0.5 * du.value;
    if (!grad) return s;
    Vec xe(c.m + 1);
    xe << du.x, 1.0;
    Vec theta_u = c.spec.A * xe;
    Vec v = theta_u + r * (hm * theta_u + hv);
    s.gh = v;
    s.gH = sym(0.5 * r + 0.5 * (theta - c.spec.theta_star) +
               2.0 * c.frob_coef * c.spec.theta_star * hm * c.spec.theta_star + 0.5 * v * v.transpose());
    s.gl = 0.5 * du.grad_lambda;
    return s;
  }

  double value(const Vec& z, Vec* grad) const {
    Vec hv = h(z);
    Mat hm = H(z);
    Side a = side(c1_, -hv, -hm, lam1(z), theta1_, grad != nullptr);
    if (!std::isfinite(a.value)) return INFINITY;
    Side b = side(c2_, hv, hm, lam2(z), theta2_, grad != nullptr);
    if (!std::isfinite(b.value)) return INFINITY;
    if (grad) *grad = pack_grad(0.5 * (b.gh - a.gh), 0.5 * (b.gH - a.gH), 0.5 * a.gl, 0.5 * b.gl);
    return 0.5 * (a.value + b.value);
  }

  // -sum log lambda - sum over both sides and signs of logdet(gamma I -+ T H T)
  // - logdet M for each side's Shor matrix M(lambda, H), which is concave
  double barrier(const Vec& z, Vec* grad) const {
    Vec l = z.tail(p1_ + p2_);
    if (l.size() && l.minCoeff() <= 0.0) return INFINITY;
    double b = -l.array().log().sum();
    Vec gl = -l.cwiseInverse();
    Mat gH = Mat::Zero(d_, d_);
    Mat hm = H(z);
    const Mat id = Mat::Identity(d_, d_);
    auto neg_logdet = [](const Mat& a, Eigen::LLT<Mat>* llt) -> double {
      llt->compute(a);
      if (llt->info() != Eigen::Success) return INFINITY;
      Vec dg = llt->matrixL().toDenseMatrix().diagonal();
      if (dg.minCoeff() <= 0.0) return INFINITY;
      return -2.0 * dg.array().log().sum();
    };
    Eigen::Index off = 0;
    for (int k = 0; k < 2; ++k) {
      const LiftContext& c = k == 0 ? c1_ : c2_;
      const double sc = k == 0 ? -1.0 : 1.0;
      const Mat hc = sc * hm;
      Mat ht = sym(c.T * hc * c.T);
      Eigen::LLT<Mat> llt;
      if (nH_) {
        for (double sg : {1.0, -1.0}) {
          double v = neg_logdet(c.spec.gamma * id - sg * ht, &llt);
          if (!std::isfinite(v)) return INFINITY;
          b += v;
          if (grad) gH += sc * sg * c.T * llt.solve(id) * c.T;
        }
      }
      const Eigen::Index m = c.m;
      const auto& cs = c.Z->constraints();
      const Eigen::Index p = static_cast<Eigen::Index>(cs.size());
      Mat au = c.spec.A.leftCols(m);
      Mat mm = Mat::Zero(m, m);
      Mat r;
      if (nH_) {
        Eigen::LLT<Mat> li(id - ht);
        if (li.info() != Eigen::Success) return INFINITY;
        r = sym(c.T * li.solve(id) * c.T);
        mm = -au.transpose() * sym(hc + hc * r * hc) * au;
      }
      Vec lk = l.segment(off, p);
      for (Eigen::Index q = 0; q < p; ++q) mm += lk(q) * cs[static_cast<std::size_t>(q)].topLeftCorner(m, m);
      double v = neg_logdet(sym(mm), &llt);
      if (!std::isfinite(v)) return INFINITY;
      b += v;
      if (grad) {
        Mat mi = llt.solve(Mat::Identity(m, m));
        for (Eigen::Index q = 0; q < p; ++q)
          gl(off + q) -= (mi.array() * cs[static_cast<std::size_t>(q)].topLeftCorner(m, m).array()).sum();
        if (nH_) {
          Mat g = au * mi * au.transpose();
          Mat e = id + r * hc;
          gH += sc * e * g * e.transpose();
        }
      }
      off += p;
    }
    if (grad) *grad = pack_grad(Vec::Zero(d_), sym(gH), gl.head(p1_), gl.tail(p2_));
    return b;
  }

  // Hessian of f + mu * barrier. The Gamma part is the envelope of
  // psi(p, x) = [x;1]'(Q(h, H) - sum lambda_k C_k)[x;1] over its maximiser x.
  Mat hessian(const Vec& z, double mu) const {
    const Eigen::Index n = size(), ns = d_ * (d_ + 1) / 2;
    Mat out = Mat::Zero(n, n);
    Vec hv = h(z);
    Mat hm = H(z);
    Eigen::Index off = nh_ + nH_;
    for (int k = 0; k < 2; ++k) {
      const LiftContext& c = k == 0 ? c1_ : c2_;
      const double sc = k == 0 ? -1.0 : 1.0;
      Vec lam = k == 0 ? lam1(z) : lam2(z);
      const Eigen::Index p = lam.size(), nl = d_ + ns + p;
      Mat hl = side_hessian(c, sc * hv, sc * hm, lam, mu);
      Mat sg = Mat::Zero(nl, n);
      if (nh_) sg.block(0, 0, d_, d_) = sc * Mat::Identity(d_, d_);
      if (nH_) sg.block(d_, nh_, ns, ns) = sc * Mat::Identity(ns, ns);
      sg.block(d_ + ns, off, p, p).setIdentity();
      out += sg.transpose() * hl * sg;
      off += p;
    }
    Vec l = z.tail(p1_ + p2_);
    out.bottomRightCorner(p1_ + p2_, p1_ + p2_).diagonal() += mu * l.cwiseInverse().cwiseAbs2();
    return sym(out);
  }

  // local coordinates [h_c; svec(H_c); lambda_c]: Phi_hat / 2 plus mu times
  // the LMI and Shor-matrix barriers of this side
  Mat side_hessian(const LiftContext& c, const Vec& hc, const Mat& hmc, const Vec& lam, double mu) const {
    const Eigen::Index d = d_, m = c.m, ns = d * (d + 1) / 2, p = lam.size(), nl = d + ns + p;
    const Mat id = Mat::Identity(d, d);
    const Mat dup = duplication(d);
    Mat ht = sym(c.T * hmc * c.T);
    Mat r = sym(c.T * (id - ht).llt().solve(id) * c.T);
    Mat q = lift_q_matrix(c, hc, hmc);
    const auto& cs = c.Z->constraints();
    Mat mm = -q.topLeftCorner(m, m);
    Vec qv = q.col(m).head(m);
    for (Eigen::Index k = 0; k < p; ++k) {
      const Mat& ck = cs[static_cast<std::size_t>(k)];
      mm += lam(k) * ck.topLeftCorner(m, m);
      qv -= lam(k) * ck.col(m).head(m);
    }
    Eigen::LLT<Mat> llt(sym(mm));
    Mat mi = llt.solve(Mat::Identity(m, m));
    Vec x = llt.solve(qv);
    Vec xe(m + 1);
    xe << x, 1.0;
    Vec th = c.spec.A * xe;
    Vec v = th + r * (hmc * th + hc);
    Mat au = c.spec.A.leftCols(m);

    Mat jwp = Mat::Zero(d, nl);
    jwp.leftCols(d) = id;
    jwp.block(0, d, d, ns) = kron(v.transpose(), id) * dup;
    Mat pxx(nl, m);
    pxx = 2.0 * jwp.transpose() * r * (c.theta_inv * au);
    for (Eigen::Index k = 0; k < p; ++k) {
      const Mat& ck = cs[static_cast<std::size_t>(k)];
      pxx.row(d + ns + k) = -2.0 * (ck.topLeftCorner(m, m) * x + ck.col(m).head(m)).transpose();
    }
    Mat hl = 0.5 * (2.0 * jwp.transpose() * r * jwp + 0.5 * pxx * mi * pxx.transpose());
    hl.block(d, d, ns, ns) +=
        dup.transpose() * (0.5 * kron(r, r) + 2.0 * c.frob_coef * kron(c.spec.theta_star, c.spec.theta_star)) * dup;
    hl *= 0.5;

    Mat hb = Mat::Zero(nl, nl);
    if (nH_) {
      for (double sg : {1.0, -1.0}) {
        Mat w = c.T * (c.spec.gamma * id - sg * ht).llt().solve(id) * c.T;
        hb.block(d, d, ns, ns) += dup.transpose() * kron(w, w) * dup;
      }
    }
    Mat lm = r * c.theta_inv * au;
    Mat jm = Mat::Zero(m * m, nl);
    jm.middleCols(d, ns) = -kron(lm.transpose(), lm.transpose()) * dup;
    for (Eigen::Index k = 0; k < p; ++k)
      jm.col(d + ns + k) = vec(Mat(cs[static_cast<std::size_t>(k)].topLeftCorner(m, m)));
    hb += jm.transpose() * kron(mi, mi) * jm;
    Mat gm = lm * mi * lm.transpose();
    hb.block(d, d, ns, ns) += dup.transpose() * (kron(r, gm) + kron(gm, r)) * dup;
    return hl + mu * hb;
  }

  double phi(const Vec& z, double mu, Vec* grad) const {
    Vec gb;
    double b = barrier(z, grad ? &gb : nullptr);
    if (!std::isfinite(b)) return INFINITY;
    double f = value(z, grad);
    if (!std::isfinite(f)) return INFINITY;
    if (grad) *grad += mu * gb;
    return f + mu * b;
  }

  Vec start() const {
    Vec z0 = Vec::Zero(d_);
    Mat h0 = Mat::Zero(d_, d_);
    return pack(z0, h0, c1_.Z->dual_start(lift_q_matrix(c1_, z0, h0)),
                c2_.Z->dual_start(lift_q_matrix(c2_, z0, h0)));
  }

  // exact Shor duals at the current (h, H); never raises the value
  Vec refresh(const Vec& z) const {
    Vec hv = h(z);
    Mat hm = H(z);
    Vec l1 = lam1(z), l2 = lam2(z);
    c1_.Z->min_dual(lift_q_matrix(c1_, -hv, -hm), &l1);
    c2_.Z->min_dual(lift_q_matrix(c2_, hv, hm), &l2);
    Vec zr = pack(hv, hm, l1, l2);
    return value(zr, nullptr) <= value(z, nullptr) ? zr : z;
  }

  const LiftContext& c1() const { return c1_; }
  const LiftContext& c2() const { return c2_; }
  const Mat& theta1() const { return theta1_; }
  const Mat& theta2() const { return theta2_; }

 private:
  const LiftContext& c1_;
  const LiftContext& c2_;
  Eigen::Index d_;
  Mat theta1_, theta2_;
  Eigen::Index nh_ = 0, nH_ = 0, p1_ = 0, p2_ = 0;
};

struct InnerResult {
  Vec z;
  double f = INFINITY;
  double gap = INFINITY;        // bound on f - min f
  double decrement = INFINITY;  // last Newton decrement (squared)
  int iterations = 0;
};

// Damped Newton on f + mu * barrier from a strictly feasible z.
int center(const PairObjective& o, Vec& z, double mu, double dtol, int max_iter, double* dec_out) {
  int it = 0;
  double dec = INFINITY;
  for (; it < max_iter; ++it) {
    Vec g;
    double v = o.phi(z, mu, &g);
    Mat hs = o.hessian(z, mu);
    const Eigen::Index n = z.size();
    double damp = 0.0;
    Vec p;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::LLT<Mat> llt(hs + damp * Mat::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        p = -llt.solve(g);
        if (p.allFinite() && g.dot(p) < 0.0) break;
      }
      p.resize(0);
      damp = std::max(2.0 * damp, 1e-12 * (1.0 + hs.diagonal().cwiseAbs().maxCoeff()));
    }
    if (p.size() == 0) p = -g;
    dec = -g.dot(p);
    if (dec <= dtol * std::max(1.0, std::abs(v))) break;
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt, t *= 0.5) {
      Vec zn = z + t * p;
      double vn = o.phi(zn, mu, nullptr);
      if (std::isfinite(vn) && vn <= v - 0.25 * t * dec) {
        z = zn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (dec_out) *dec_out = dec;
  return it;
}

// Barrier path following down to mu * nu <= target.
InnerResult minimize_pair(const PairObjective& o, const Vec* warm, const QuadSolveOptions& opt) {
  InnerResult out;
  Vec z = o.start();
  double mu = 1.0;
  if (warm && warm->size() == z.size() && std::isfinite(o.phi(*warm, 1e-6, nullptr))) {
    z = *warm;
    mu = 1e-4;
  }
  const double target = 1e-3 * opt.tol;
  int budget = opt.max_iter;
  double dec = INFINITY;
  for (;;) {
    int used = center(o, z, mu, opt.gtol, std::max(1, std::min(200, budget)), &dec);
    out.iterations += used + 1;
    budget -= used + 1;
    double scale = std::max(1.0, std::abs(o.value(z, nullptr)));
    if (mu * o.nu() <= target * scale || budget <= 0) break;
    mu *= 0.1;
  }
  z = o.refresh(z);
  out.z = z;
  out.f = o.value(z, nullptr);
  out.decrement = dec;
  out.gap = mu * o.nu() + dec;
  return out;
}

// max over the covariance set of Tr(Theta G); singletons return the point.
Mat max_linear_theta(const ConvexSet& ucov, const Mat& g, Eigen::Index d) {
  if (ucov.is_singleton()) return unvec(ucov.project(Vec::Zero(d * d)), d);
  auto sp = ucov.try_support_point(vec(sym(g)));
  if (!sp)
    throw CapabilityError("solve_quad_detector: covariance set " + ucov.describe() +
                          " has no support point in the required direction");
  return sym(unvec(*sp, d));
}

}  // namespace

QuadDetector solve_quad_detector(const QuadLiftSpec& s1, const QuadLiftSpec& s2, const QuadSolveOptions& opt) {
  LiftContext c1 = make_lift_context(s1);
  LiftContext c2 = make_lift_context(s2);
  if (c1.d != c2.d)
    throw InvalidArgument("solve_quad_detector: observation dimensions differ (" + std::to_string(c1.d) +
                          " vs " + std::to_string(c2.d) + ")");
  if (!c1.Z->is_shor() || !c2.Z->is_shor())
    throw CapabilityError("solve_quad_detector: needs Shor relaxations of U (box, ball or explicit "
                          "quadratic constraints)");
  if (!(opt.tol > 0.0) || !(opt.gtol > 0.0) || opt.max_iter < 1 || opt.outer_iter < 1)
    throw InvalidArgument("solve_quad_detector: invalid solver options");
  const Eigen::Index d = c1.d;
  const bool fixed_theta = s1.Ucov->is_singleton() && s2.Ucov->is_singleton();

  struct Candidate {
    QuadMode mode;
    Vec z;
    double f = INFINITY;
    Mat th1, th2;
  };

  // For a fixed covariance pair: the requested mode, and in full mode also
  // the H = 0 restriction, whose points are feasible for the full problem.
  auto solve_fixed = [&](const Mat& th1, const Mat& th2, InnerResult* info) {
    std::vector<QuadMode> modes{opt.mode};
    if (opt.mode == QuadMode::full) modes.insert(modes.begin(), QuadMode::affine_only);
    Candidate best;
    double gap = INFINITY, dec = INFINITY;
    int iters = 0;
    for (QuadMode md : modes) {
      PairObjective o(c1, c2, md, th1, th2);
      InnerResult r = minimize_pair(o, nullptr, opt);
      iters += r.iterations;
      if (md == opt.mode) {
        gap = r.gap;
        dec = r.decrement;
      }
      if (r.f < best.f) best = Candidate{md, r.z, r.f, th1, th2};
    }
    info->gap = gap;
    info->decrement = dec;
    info->iterations = iters;
    info->f = best.f;
    return best;
  };

  Candidate best;
  double lower = -INFINITY;
  double dec = INFINITY;
  int iters = 0;
  if (fixed_theta) {
    Mat th1 = unvec(s1.Ucov->project(Vec::Zero(d * d)), d);
    Mat th2 = unvec(s2.Ucov->project(Vec::Zero(d * d)), d);
    InnerResult info;
    best = solve_fixed(th1, th2, &info);
    lower = best.f - info.gap;
    dec = info.decrement;
    iters = info.iterations;
  } else {
    // D(Theta1, Theta2) = min_z f(z; Theta) is concave with gradient
    // (-H/4, H/4); ascend it, certifying with the covariance best responses.
    const Eigen::Index n2 = d * d;
    SmoothFn negd = [&](const Vec& t, Vec* g) {
      Mat th1 = sym(unvec(t, 0, d)), th2 = sym(unvec(t, n2, d));
      InnerResult info;
      Candidate c = solve_fixed(th1, th2, &info);
      iters += info.iterations;
      dec = std::min(dec, info.decrement);
      lower = std::max(lower, c.f - info.gap);
      PairObjective oc(c1, c2, c.mode, th1, th2);
      Mat hm = oc.H(c.z);
      Mat u1 = max_linear_theta(*s1.Ucov, -hm, d), u2 = max_linear_theta(*s2.Ucov, hm, d);
      PairObjective ou(c1, c2, c.mode, u1, u2);
      double up = ou.value(c.z, nullptr);
      if (up < best.f) best = Candidate{c.mode, c.z, up, u1, u2};
      if (g) {
        g->resize(2 * n2);
        g->head(n2) = vec(Mat(0.25 * hm));
        g->tail(n2) = vec(Mat(-0.25 * hm));
      }
      return -c.f;
    };
    Projector proj = [&](const Vec& t) {
      Vec out(2 * n2);
      out.head(n2) = s1.Ucov->project(t.head(n2));
      out.tail(n2) = s2.Ucov->project(t.tail(n2));
      return out;
    };
    Vec t0(2 * n2);
    t0.head(n2) = vec(c1.spec.theta_star);
    t0.tail(n2) = vec(c2.spec.theta_star);
    FistaOptions fo;
    fo.max_iter = opt.outer_iter;
    fo.gtol = 1e-10;
    fista_minimize(negd, proj, proj(t0), fo);
  }

  PairObjective fin(c1, c2, best.mode, best.th1, best.th2);
  Vec hv = fin.h(best.z);
  Mat hm = fin.H(best.z);
  PairObjective::Side a = fin.side(c1, -hv, -hm, fin.lam1(best.z), best.th1, false);
  PairObjective::Side b = fin.side(c2, hv, hm, fin.lam2(best.z), best.th2, false);
  QuadDetector det;
  det.h = hv;
  det.H = hm;
  det.a = 0.5 * (a.value - b.value);
  double val = 0.5 * (a.value + b.value);
  det.risk = std::min(1.0, std::exp(val));
  det.gap = std::max(0.0, val - lower);
  det.stationarity = dec;
  det.iterations = iters;
  det.converged = det.gap <= opt.tol * std::max(1.0, std::abs(val));
  if (!det.converged) {
    std::ostringstream os;
    os << "solve_quad_detector(" << to_string(opt.mode) << "): no convergence (gap " << det.gap
       << ", Newton decrement " << det.stationarity << ", risk bound " << det.risk << ")";
    throw QuadNonConvergence(os.str(), det);
  }
  return det;
}

// ------------------------------------------------------ special case

namespace {

class AffineMeanPhi final : public PhiOracle {
 public:
  AffineMeanPhi(Mat a, Mat theta) : a_(std::move(a)), theta_(std::move(theta)) {}
  PhiEval evaluate(const Vec& h, const Vec& u, unsigned need) const override {
    const Eigen::Index m = a_.cols() - 1;
    Vec mean = a_.leftCols(m) * u + a_.col(m);
    PhiEval r;
    r.value = h.dot(mean) + 0.5 * h.dot(theta_ * h);
    if (need & kGradH) r.grad_h = mean + theta_ * h;
    if (need & kGradMu) r.grad_mu = a_.leftCols(m).transpose() * h;
    return r;
  }
  bool affine_in_mu() const override { return true; }

 private:
  Mat a_, theta_;
};

RegularData affine_mean_family(const LiftContext& c) {
  return RegularData(whole_space(c.d), c.spec.U, std::make_shared<AffineMeanPhi>(c.spec.A, c.spec.theta_star),
                     FamilyKind::custom);
}

}  // namespace

AffineDetector special_case_affine(const QuadLiftSpec& s1, const QuadLiftSpec& s2, const SaddleOptions& opt) {
  LiftContext c1 = make_lift_context(s1);
  LiftContext c2 = make_lift_context(s2);
  if (c1.d != c2.d) throw InvalidArgument("special_case_affine: observation dimensions differ");
  SaddleProblem prob(affine_mean_family(c1), affine_mean_family(c2), opt);
  SaddleSolution sol = solve_saddle(prob);
  return build_detector(sol, prob);
}

// ------------------------------------------------- bounded observations

SpectahedronSet::SpectahedronSet(Eigen::Index side, std::vector<Mat> q, ZOracle support)
    : ConvexSet(side * side), side_(side), q_(std::move(q)), support_(std::move(support)) {
  if (side < 2) throw InvalidArgument("spectahedron: side must be at least 2");
  const Eigen::Index d = side - 1;
  Mat s = Mat::Zero(d, d);
  Vec a = Vec::Zero(d);
  double al = 0.0;
  for (Mat& m : q_) {
    if (m.rows() != side || m.cols() != side)
      throw InvalidArgument("spectahedron: constraint is " + shape_str(m) + ", expected " +
                            std::to_string(side) + "x" + std::to_string(side));
    m = sym(m);
    s += m.topLeftCorner(d, d);
    a += m.col(d).head(d);
    al += m(d, d);
  }
  if (q_.empty() || min_eigenvalue(s) <= 0.0)
    throw InvalidArgument("spectahedron: the quadratic parts must sum to a positive definite matrix");
  // Tr(Q Z) <= lambda0 with Q = lambda0 Q0 + sum Q_l > 0 bounds the trace
  double lambda0 = std::max(0.0, a.dot(s.ldlt().solve(a)) - al) + 1.0;
  Mat qq = Mat::Zero(side, side);
  qq.topLeftCorner(d, d) = s;
  qq.col(d).head(d) = a;
  qq.row(d).head(d) = a.transpose();
  qq(d, d) = al + lambda0;
  radius_ = lambda0 / min_eigenvalue(qq);
}

Vec SpectahedronSet::project(const Vec& x) const {
  check_dim(x, "spectahedron::project");
  const Eigen::Index n = side_;
  std::vector<Projector> projs;
  projs.push_back([n](const Vec& v) { return vec(project_psd(sym(unvec(v, n)))); });
  projs.push_back([n](const Vec& v) {
    Vec o = v;
    o((n - 1) * n + (n - 1)) = 1.0;
    return o;
  });
  for (const Mat& q : q_) {
    Vec qv = vec(q);
    double nn = qv.squaredNorm();
    projs.push_back([qv, nn](const Vec& v) {
      double t = qv.dot(v);
      if (t <= 0.0) return v;
      return Vec(v - (t / nn) * qv);
    });
  }
  return vec(sym(unvec(dykstra(projs, vec(sym(unvec(x, n)))), n)));
}

bool SpectahedronSet::contains(const Vec& x, double tol) const {
  if (x.size() != dim() || !x.allFinite()) return false;
  Mat z = unvec(x, side_);
  double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
  if ((z - z.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  if (min_eigenvalue(sym(z)) < -tol * scale) return false;
  if (std::abs(z(side_ - 1, side_ - 1) - 1.0) > tol * scale) return false;
  for (const Mat& q : q_)
    if ((q.array() * z.array()).sum() > tol * scale * std::max(1.0, q.cwiseAbs().maxCoeff())) return false;
  return true;
}

std::optional<Vec> SpectahedronSet::try_support_point(const Vec& g) const {
  check_dim(g, "spectahedron::support");
  if (!support_) return std::nullopt;
  ZSupport s = support_(sym(unvec(g, side_)));
  if (s.maximizer.rows() != side_ || s.maximizer.cols() != side_)
    throw CapabilityError("spectahedron: support oracle returned a " + shape_str(s.maximizer) + " maximiser");
  return vec(sym(s.maximizer));
}

std::string SpectahedronSet::describe() const {
  return "spectahedron in S^" + std::to_string(side_) + " with " + std::to_string(q_.size()) +
         " quadratic constraints";
}

RegularData lift_bounded_support(Eigen::Index d, std::vector<Mat> q, ZOracle support, double g_radius) {
  if (!support) throw CapabilityError("lift_bounded_support: a support-function oracle is required");
  if (!(g_radius > 0.0)) throw InvalidArgument("lift_bounded_support: g_radius must be positive");
  auto x = std::make_shared<SpectahedronSet>(d + 1, std::move(q), std::move(support));
  RegularData base = bounded_support_family(x, x);
  return refine_with_support(base, x, ball(Vec::Zero(x->dim()), g_radius));
}

RegularData lift_bounded_subgaussian(SetPtr u) {
  if (!u) throw InvalidArgument("lift_bounded_subgaussian: null set");
  if (!u->bound_radius()) throw InvalidArgument("lift_bounded_subgaussian: U must be bounded");
  const Eigen::Index n = u->dim();
  return sub_gaussian_family(std::move(u), singleton(vec(2.0 * Mat::Identity(n, n))));
}

}  // namespace dforge
