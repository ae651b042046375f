#include "dforge/convex_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dforge/errors.hpp"
#include "dforge/optim.hpp"

namespace dforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel(const Vec& x) { return std::max(1.0, x.norm()); }

}  // namespace

void ConvexSet::check_dim(const Vec& x, const char* who) const {
  if (x.size() != dim_) {
    std::ostringstream os;
    os << who << ": expected dimension " << dim_ << ", got " << x.size();
    throw InvalidArgument(os.str());
  }
}

bool ConvexSet::contains(const Vec& x, double tol) const {
  if (x.size() != dim_ || !x.allFinite()) return false;
  return (project(x) - x).norm() <= tol * rel(x);
}

std::optional<Vec> ConvexSet::try_support_point(const Vec&) const { return std::nullopt; }

Vec ConvexSet::support_point(const Vec& g) const {
  check_dim(g, "support_point");
  auto p = try_support_point(g);
  if (!p) throw CapabilityError("support function unavailable for " + describe());
  return *p;
}

double ConvexSet::support(const Vec& g) const { return g.dot(support_point(g)); }

// ---------------------------------------------------------------- WholeSpace

std::optional<Vec> WholeSpace::try_support_point(const Vec& g) const {
  if (g.isZero(0.0)) return Vec::Zero(dim());
  return std::nullopt;
}

std::string WholeSpace::describe() const { return "R^" + std::to_string(dim()); }

// ----------------------------------------------------------------- Singleton

Singleton::Singleton(Vec p) : ConvexSet(p.size()), p_(std::move(p)) {
  if (p_.size() == 0) throw InvalidArgument("singleton: empty point");
  if (!p_.allFinite()) throw InvalidArgument("singleton: non-finite point");
}

std::string Singleton::describe() const { return "singleton in R^" + std::to_string(dim()); }

// ----------------------------------------------------------------------- Box

Box::Box(Vec lo, Vec hi) : ConvexSet(lo.size()), lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() == 0 || lo_.size() != hi_.size())
    throw InvalidArgument("box: lo/hi size mismatch");
  for (Eigen::Index i = 0; i < lo_.size(); ++i) {
    if (std::isnan(lo_[i]) || std::isnan(hi_[i]) || lo_[i] > hi_[i])
      throw InvalidArgument("box: lo[" + std::to_string(i) + "] > hi[" + std::to_string(i) + "]");
  }
  bounded_ = lo_.allFinite() && hi_.allFinite();
}

Vec Box::project(const Vec& x) const {
  check_dim(x, "box::project");
  return x.cwiseMax(lo_).cwiseMin(hi_);
}

bool Box::contains(const Vec& x, double tol) const {
  if (x.size() != dim()) return false;
  double t = tol * rel(x);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo_[i] - t && x[i] <= hi_[i] + t)) return false;
  return true;
}

std::optional<Vec> Box::try_support_point(const Vec& g) const {
  check_dim(g, "box::support");
  Vec p(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    if (g[i] > 0.0)
      p[i] = hi_[i];
    else if (g[i] < 0.0)
      p[i] = lo_[i];
    else
      p[i] = std::clamp(0.0, lo_[i], hi_[i]);
    if (!std::isfinite(p[i])) return std::nullopt;
  }
  return p;
}

std::optional<double> Box::bound_radius() const {
  if (!bounded_) return std::nullopt;
  return lo_.cwiseAbs().cwiseMax(hi_.cwiseAbs()).norm();
}

std::string Box::describe() const { return "box in R^" + std::to_string(dim()); }

// ---------------------------------------------------------------------- Ball

Ball::Ball(Vec center, double radius) : ConvexSet(center.size()), c_(std::move(center)), r_(radius) {
  if (c_.size() == 0) throw InvalidArgument("ball: empty center");
  if (!(r_ >= 0.0) || !std::isfinite(r_)) throw InvalidArgument("ball: radius must be finite and >= 0");
}

Vec Ball::project(const Vec& x) const {
  check_dim(x, "ball::project");
  Vec d = x - c_;
  double n = d.norm();
  if (n <= r_) return x;
  return c_ + d * (r_ / n);
}

std::optional<Vec> Ball::try_support_point(const Vec& g) const {
  check_dim(g, "ball::support");
  double n = g.norm();
  if (n == 0.0) return c_;
  return Vec(c_ + g * (r_ / n));
}

std::string Ball::describe() const { return "ball in R^" + std::to_string(dim()); }

// ------------------------------------------------------------------- Simplex

Simplex::Simplex(Eigen::Index dim, double total)
    : Simplex(Vec::Zero(dim), Vec::Constant(dim, total), total) {}

Simplex::Simplex(Vec lo, Vec hi, double total)
    : ConvexSet(lo.size()), lo_(std::move(lo)), hi_(std::move(hi)), total_(total) {
  if (lo_.size() == 0 || lo_.size() != hi_.size())
    throw InvalidArgument("simplex: lo/hi size mismatch");
  if (!lo_.allFinite()) throw InvalidArgument("simplex: lower bounds must be finite");
  if ((hi_ - lo_).minCoeff() < 0.0) throw InvalidArgument("simplex: lo > hi");
  if (lo_.sum() > total_ + 1e-12 || hi_.sum() < total_ - 1e-12)
    throw InvalidArgument("simplex: bounds incompatible with the total");
}

Vec Simplex::project(const Vec& y) const {
  check_dim(y, "simplex::project");
  auto mass = [&](double tau) { return (y.array() - tau).max(lo_.array()).min(hi_.array()).sum(); };
  double a = (y - hi_.cwiseMin(Vec::Constant(dim(), 1e300))).minCoeff();
  double b = (y - lo_).maxCoeff();
  // mass is nonincreasing in tau; mass(a) >= total >= mass(b)
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if (mass(m) > total_)
      a = m;
    else
      b = m;
  }
  double tau = 0.5 * (a + b);
  Vec x = (y.array() - tau).max(lo_.array()).min(hi_.array()).matrix();
  // distribute the rounding residue over free coordinates
  double res = total_ - x.sum();
  if (res != 0.0) {
    for (Eigen::Index i = 0; i < x.size() && res != 0.0; ++i) {
      double nx = std::clamp(x[i] + res, lo_[i], hi_[i]);
      res -= nx - x[i];
      x[i] = nx;
    }
  }
  return x;
}

bool Simplex::contains(const Vec& x, double tol) const {
  if (x.size() != dim()) return false;
  if (std::abs(x.sum() - total_) > tol) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo_[i] - tol && x[i] <= hi_[i] + tol)) return false;
  return true;
}

std::optional<Vec> Simplex::try_support_point(const Vec& g) const {
  check_dim(g, "simplex::support");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return g[i] > g[j]; });
  Vec x = lo_;
  double rem = total_ - lo_.sum();
  for (auto i : idx) {
    if (rem <= 0.0) break;
    double add = std::min(hi_[i] - lo_[i], rem);
    x[i] += add;
    rem -= add;
  }
  return x;
}

std::optional<double> Simplex::bound_radius() const {
  if (lo_.minCoeff() >= 0.0) return total_;
  double s = lo_.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < dim(); ++i) {
    double h = std::min(hi_[i], total_ - (s - lo_[i]));
    acc += std::max(lo_[i] * lo_[i], h * h);
  }
  return std::sqrt(acc);
}

std::string Simplex::describe() const { return "simplex in R^" + std::to_string(dim()); }

// ----------------------------------------------------- HalfSpaceIntersection

HalfSpaceIntersection::HalfSpaceIntersection(SetPtr base, const Mat& a, const Vec& b)
    : ConvexSet(base ? base->dim() : 0), base_(std::move(base)) {
  if (!base_) throw InvalidArgument("half-space intersection: null base set");
  if (a.cols() != dim() || a.rows() != b.size())
    throw InvalidArgument("half-space intersection: A is " + shape_str(a) + ", b has " +
                          std::to_string(b.size()) + " entries, base dimension " +
                          std::to_string(dim()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    double n = a.row(k).norm();
    if (n == 0.0) {
      if (b[k] < 0.0) trivially_empty_ = true;
      continue;
    }
    keep.push_back(k);
  }
  a_.resize(static_cast<Eigen::Index>(keep.size()), dim());
  b_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    double n = a.row(keep[r]).norm();
    a_.row(static_cast<Eigen::Index>(r)) = a.row(keep[r]) / n;
    b_[static_cast<Eigen::Index>(r)] = b[keep[r]] / n;
  }
}

Vec HalfSpaceIntersection::project(const Vec& x) const {
  check_dim(x, "half-space intersection::project");
  if (a_.rows() == 0) return base_->project(x);
  std::vector<Projector> projs;
  projs.reserve(static_cast<std::size_t>(a_.rows()) + 1);
  projs.push_back([this](const Vec& z) { return base_->project(z); });
  for (Eigen::Index k = 0; k < a_.rows(); ++k) {
    projs.push_back([this, k](const Vec& z) {
      double v = a_.row(k).dot(z) - b_[k];
      if (v <= 0.0) return z;
      return Vec(z - v * a_.row(k).transpose());
    });
  }
  return dykstra(projs, x);
}

bool HalfSpaceIntersection::contains(const Vec& x, double tol) const {
  if (trivially_empty_ || !base_->contains(x, tol)) return false;
  if (a_.rows() == 0) return true;
  return ((a_ * x - b_).array() <= tol * rel(x)).all();
}

std::optional<Vec> HalfSpaceIntersection::try_support_point(const Vec& g) const {
  if (base_->is_singleton() && !trivially_empty_) return base_->try_support_point(g);
  return std::nullopt;
}

double HalfSpaceIntersection::infeasibility() const {
  if (trivially_empty_) return kInf;
  if (a_.rows() == 0) return 0.0;
  auto viol = [this](const Vec& x) { return Vec((a_ * x - b_).cwiseMax(0.0)); };
  if (base_->is_singleton()) return viol(base_->project(Vec::Zero(dim()))).norm();
  SmoothFn f = [&](const Vec& x, Vec* g) {
    Vec v = viol(x);
    if (g) *g = a_.transpose() * v;
    return 0.5 * v.squaredNorm();
  };
  Projector p = [this](const Vec& x) { return base_->project(x); };
  // start from the Dykstra projection of the origin: exact when feasible
  Vec x0 = project(Vec::Zero(dim()));
  double v0 = viol(base_->project(x0)).norm();
  if (v0 == 0.0) return 0.0;
  FistaOptions opt;
  opt.l0 = std::max(1e-6, spectral_norm(a_) * spectral_norm(a_));
  opt.max_iter = 20000;
  opt.gtol = 1e-14;
  auto r = fista_minimize(f, p, base_->project(x0), opt);
  return std::min(v0, std::sqrt(2.0 * std::max(r.f, 0.0)));
}

std::string HalfSpaceIntersection::describe() const {
  return base_->describe() + " cut by " + std::to_string(a_.rows()) + " half-spaces";
}

// --------------------------------------------------------------- PsdInterval

namespace {

bool scalar_identity(const Mat& m, double* s) {
  if (m.rows() == 0) return false;
  double d = m(0, 0);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != (i == j ? d : 0.0)) return false;
  *s = d;
  return true;
}

Eigen::Index psd_side(const std::optional<Mat>& lower, const std::optional<Mat>& upper) {
  const Mat* ref = lower ? &*lower : (upper ? &*upper : nullptr);
  if (!ref) throw InvalidArgument("psd interval: at least one bound required");
  if (ref->rows() == 0) throw InvalidArgument("psd interval: empty matrix");
  return ref->rows();
}

}  // namespace

PsdInterval::PsdInterval(std::optional<Mat> lower, std::optional<Mat> upper)
    : ConvexSet(psd_side(lower, upper) * psd_side(lower, upper)),
      d_(psd_side(lower, upper)),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {
  for (const auto* m : {lower_ ? &*lower_ : nullptr, upper_ ? &*upper_ : nullptr}) {
    if (!m) continue;
    if (m->rows() != d_ || m->cols() != d_)
      throw InvalidArgument("psd interval: bounds must be square of equal size");
    if (!m->allFinite()) throw InvalidArgument("psd interval: non-finite bound");
    if ((*m - m->transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m->cwiseAbs().maxCoeff()))
      throw InvalidArgument("psd interval: bound not symmetric");
  }
  if (lower_) *lower_ = sym(*lower_);
  if (upper_) *upper_ = sym(*upper_);
  if (lower_ && upper_ && !is_psd(*upper_ - *lower_, 1e-12))
    throw InvalidArgument("psd interval: lower bound not below upper bound");
  if (lower_ && upper_)
    scalar_ = scalar_identity(*lower_, &lo_scalar_) && scalar_identity(*upper_, &hi_scalar_);
}

std::shared_ptr<PsdInterval> PsdInterval::cone(Eigen::Index d) {
  return std::make_shared<PsdInterval>(Mat::Zero(d, d), std::nullopt);
}

Vec PsdInterval::project(const Vec& x) const {
  check_dim(x, "psd interval::project");
  Mat m = sym(unvec(x, d_));
  if (scalar_) return vec(clip_spectrum(m, lo_scalar_, hi_scalar_));
  auto above = [this](const Mat& z) { return Mat(*lower_ + project_psd(z - *lower_)); };
  auto below = [this](const Mat& z) { return Mat(*upper_ - project_psd(*upper_ - z)); };
  if (lower_ && !upper_) return vec(above(m));
  if (upper_ && !lower_) return vec(below(m));
  std::vector<Projector> projs = {
      [&](const Vec& z) { return vec(above(sym(unvec(z, d_)))); },
      [&](const Vec& z) { return vec(below(sym(unvec(z, d_)))); }};
  Vec r = dykstra(projs, vec(m));
  return vec(sym(unvec(r, d_)));
}

bool PsdInterval::contains(const Vec& x, double tol) const {
  if (x.size() != dim() || !x.allFinite()) return false;
  Mat m = unvec(x, d_);
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  if (lower_ && min_eigenvalue(m - *lower_) < -tol * scale) return false;
  if (upper_ && min_eigenvalue(*upper_ - m) < -tol * scale) return false;
  return true;
}

std::optional<Vec> PsdInterval::try_support_point(const Vec& g) const {
  check_dim(g, "psd interval::support");
  Mat w = sym(unvec(g, d_));
  double scale = std::max(1e-300, w.cwiseAbs().maxCoeff());
  if (w.cwiseAbs().maxCoeff() == 0.0) return project(Vec::Zero(dim()));
  Eigen::SelfAdjointEigenSolver<Mat> es(w);
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() >= -1e-14 * scale) {
    if (!upper_) return std::nullopt;
    return vec(*upper_);
  }
  if (ev.maxCoeff() <= 1e-14 * scale) {
    if (!lower_) return std::nullopt;
    return vec(*lower_);
  }
  if (!scalar_) return std::nullopt;
  Vec t(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) t[i] = ev[i] > 0.0 ? hi_scalar_ : lo_scalar_;
  return vec(es.eigenvectors() * t.asDiagonal() * es.eigenvectors().transpose());
}

std::optional<double> PsdInterval::bound_radius() const {
  if (!lower_ || !upper_) return std::nullopt;
  if (is_psd(*lower_, 1e-14)) return upper_->norm();
  return lower_->norm() + (*upper_ - *lower_).norm();
}

bool PsdInterval::is_singleton() const {
  return lower_ && upper_ && (*upper_ - *lower_).cwiseAbs().maxCoeff() == 0.0;
}

std::string PsdInterval::describe() const {
  return "psd interval of " + std::to_string(d_) + "x" + std::to_string(d_) + " matrices";
}

// ---------------------------------------------------------------- ProductSet

namespace {

Eigen::Index total_dim(const std::vector<SetPtr>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) {
    if (!p) throw InvalidArgument("product: null part");
    n += p->dim();
  }
  return n;
}

}  // namespace

ProductSet::ProductSet(std::vector<SetPtr> parts) : ConvexSet(total_dim(parts)), parts_(std::move(parts)) {
  if (parts_.empty()) throw InvalidArgument("product: no parts");
  Eigen::Index off = 0;
  for (const auto& p : parts_) {
    offsets_.push_back(off);
    off += p->dim();
  }
}

Vec ProductSet::project(const Vec& x) const {
  check_dim(x, "product::project");
  Vec r(dim());
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    auto n = parts_[i]->dim();
    r.segment(offsets_[i], n) = parts_[i]->project(x.segment(offsets_[i], n));
  }
  return r;
}

bool ProductSet::contains(const Vec& x, double tol) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < parts_.size(); ++i)
    if (!parts_[i]->contains(x.segment(offsets_[i], parts_[i]->dim()), tol)) return false;
  return true;
}

std::optional<Vec> ProductSet::try_support_point(const Vec& g) const {
  check_dim(g, "product::support");
  Vec r(dim());
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    auto n = parts_[i]->dim();
    auto p = parts_[i]->try_support_point(g.segment(offsets_[i], n));
    if (!p) return std::nullopt;
    r.segment(offsets_[i], n) = *p;
  }
  return r;
}

bool ProductSet::has_support() const {
  return std::all_of(parts_.begin(), parts_.end(), [](const SetPtr& p) { return p->has_support(); });
}

std::optional<double> ProductSet::bound_radius() const {
  double acc = 0.0;
  for (const auto& p : parts_) {
    auto r = p->bound_radius();
    if (!r) return std::nullopt;
    acc += *r * *r;
  }
  return std::sqrt(acc);
}

bool ProductSet::is_singleton() const {
  return std::all_of(parts_.begin(), parts_.end(), [](const SetPtr& p) { return p->is_singleton(); });
}

bool ProductSet::is_whole_space() const {
  return std::all_of(parts_.begin(), parts_.end(), [](const SetPtr& p) { return p->is_whole_space(); });
}

std::string ProductSet::describe() const {
  std::string s = "product(";
  for (std::size_t i = 0; i < parts_.size(); ++i) s += (i ? ", " : "") + parts_[i]->describe();
  return s + ")";
}

// ----------------------------------------------------------------- ScaledSet

ScaledSet::ScaledSet(SetPtr inner, double s) : ConvexSet(inner ? inner->dim() : 0), inner_(std::move(inner)), s_(s) {
  if (!inner_) throw InvalidArgument("scaled set: null inner set");
  if (!(s_ > 0.0) || !std::isfinite(s_)) throw InvalidArgument("scaled set: factor must be positive");
}

Vec ScaledSet::project(const Vec& x) const { return s_ * inner_->project(x / s_); }

bool ScaledSet::contains(const Vec& x, double tol) const { return inner_->contains(x / s_, tol); }

std::optional<Vec> ScaledSet::try_support_point(const Vec& g) const {
  auto p = inner_->try_support_point(g);
  if (!p) return std::nullopt;
  return Vec(s_ * *p);
}

std::optional<double> ScaledSet::bound_radius() const {
  auto r = inner_->bound_radius();
  if (!r) return std::nullopt;
  return s_ * *r;
}

std::string ScaledSet::describe() const { return "scaled " + inner_->describe(); }

// --------------------------------------------------------------- PreimageSet

PreimageSet::PreimageSet(SetPtr inner, Mat a) : ConvexSet(a.rows()), inner_(std::move(inner)), a_(std::move(a)) {
  if (!inner_) throw InvalidArgument("preimage: null inner set");
  if (a_.cols() != inner_->dim())
    throw InvalidArgument("preimage: map has " + std::to_string(a_.cols()) + " columns, set dimension " +
                          std::to_string(inner_->dim()));
  factor_.compute(Mat::Identity(a_.rows(), a_.rows()) + a_ * a_.transpose());
}

Vec PreimageSet::project(const Vec& y0) const {
  check_dim(y0, "preimage::project");
  if (inner_->contains(a_.transpose() * y0, 1e-13)) return y0;
  // ADMM on min 1/2|y - y0|^2 s.t. A'y = z, z in inner
  Vec y = y0;
  Vec z = inner_->project(a_.transpose() * y0);
  Vec u = Vec::Zero(z.size());
  for (int it = 0; it < 20000; ++it) {
    y = factor_.solve(y0 + a_ * (z - u));
    Vec aty = a_.transpose() * y;
    Vec zn = inner_->project(aty + u);
    u += aty - zn;
    double r = (aty - zn).norm();
    double s = (zn - z).norm();
    z = std::move(zn);
    if (r <= 1e-13 * rel(aty) && s <= 1e-13 * rel(z)) break;
  }
  return y;
}

bool PreimageSet::contains(const Vec& y, double tol) const {
  if (y.size() != dim()) return false;
  return inner_->contains(a_.transpose() * y, tol);
}

std::string PreimageSet::describe() const { return "preimage of " + inner_->describe(); }

// ----------------------------------------------------------- IntersectionSet

IntersectionSet::IntersectionSet(std::vector<SetPtr> sets)
    : ConvexSet(sets.empty() || !sets[0] ? 0 : sets[0]->dim()), sets_(std::move(sets)) {
  if (sets_.empty()) throw InvalidArgument("intersection: no sets");
  for (const auto& s : sets_)
    if (!s || s->dim() != dim()) throw InvalidArgument("intersection: dimension mismatch");
}

Vec IntersectionSet::project(const Vec& x) const {
  check_dim(x, "intersection::project");
  std::vector<Projector> projs;
  for (const auto& s : sets_) projs.push_back([s](const Vec& z) { return s->project(z); });
  return dykstra(projs, x);
}

bool IntersectionSet::contains(const Vec& x, double tol) const {
  return std::all_of(sets_.begin(), sets_.end(), [&](const SetPtr& s) { return s->contains(x, tol); });
}

std::optional<double> IntersectionSet::bound_radius() const {
  std::optional<double> best;
  for (const auto& s : sets_) {
    auto r = s->bound_radius();
    if (r && (!best || *r < *best)) best = r;
  }
  return best;
}

std::string IntersectionSet::describe() const {
  std::string s = "intersection(";
  for (std::size_t i = 0; i < sets_.size(); ++i) s += (i ? ", " : "") + sets_[i]->describe();
  return s + ")";
}

// --------------------------------------------------------------- factories

SetPtr whole_space(Eigen::Index d) { return std::make_shared<WholeSpace>(d); }
SetPtr singleton(Vec p) { return std::make_shared<Singleton>(std::move(p)); }
SetPtr box(Vec lo, Vec hi) { return std::make_shared<Box>(std::move(lo), std::move(hi)); }
SetPtr ball(Vec c, double r) { return std::make_shared<Ball>(std::move(c), r); }
SetPtr product(std::vector<SetPtr> parts) {
  if (parts.size() == 1) return parts[0];
  return std::make_shared<ProductSet>(std::move(parts));
}

SetPtr restrict_to_ball(const SetPtr& s, double r) {
  if (s->is_whole_space()) return ball(Vec::Zero(s->dim()), r);
  auto br = s->bound_radius();
  if (br && *br <= r) return s;
  return std::make_shared<IntersectionSet>(std::vector<SetPtr>{s, ball(Vec::Zero(s->dim()), r)});
}

}  // namespace dforge
