#include "dforge/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dforge {

namespace {

double eval_or_inf(const SmoothFn& f, const Vec& x, Vec* g) {
  double v = f(x, g);
  if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  if (g != nullptr && !g->allFinite()) return std::numeric_limits<double>::infinity();
  return v;
}

}  // namespace

FistaResult fista_minimize(const SmoothFn& f, const Projector& proj, const Vec& x0,
                           const FistaOptions& opt) {
  FistaResult res;
  Vec x = proj(x0);
  Vec gx;
  double fx = eval_or_inf(f, x, &gx);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    return res;
  }
  const double gscale = std::max(1.0, gx.norm());
  double L = std::max(opt.l0, 1e-12);
  Vec y = x, gy = gx;
  double fy = fx;
  double t = 1.0;
  int stall = 0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    res.iterations = it;
    L = std::max(L * 0.5, 1e-14);
    Vec xn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 200; ++bt) {
      xn = proj(y - gy / L);
      Vec d = xn - y;
      fn = eval_or_inf(f, xn, &gn);
      double model = fy + gy.dot(d) + 0.5 * L * d.squaredNorm();
      if (std::isfinite(fn) && fn <= model + 1e-15 * std::abs(fy)) {
        accepted = true;
        break;
      }
      L *= 2.0;
    }
    if (!accepted) break;
    res.stationarity = L * (xn - y).norm();

    // adaptive restart when the momentum direction fails to decrease f
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    bool restart = fn > fx || gy.dot(xn - x) > 0.0;
    Vec step = xn - x;
    double fprev = fx;
    if (fn <= fx) {
      x = xn;
      fx = fn;
      gx = gn;
    }
    if (restart) {
      t = 1.0;
      y = x;
      gy = gx;
      fy = fx;
    } else {
      y = xn + ((t - 1.0) / tn) * step;
      y = proj(y);
      t = tn;
      fy = eval_or_inf(f, y, &gy);
      if (!std::isfinite(fy)) {
        y = x;
        gy = gx;
        fy = fx;
        t = 1.0;
      }
    }

    bool small_step = step.norm() <= opt.xtol * std::max(1.0, x.norm());
    bool small_f = std::abs(fprev - fx) <= opt.ftol * std::max(1.0, std::abs(fx));
    if (res.stationarity <= opt.gtol * gscale) {
      res.converged = true;
      break;
    }
    // rounding-level objective changes with no accepted move also count as a stall
    stall = (small_f && (small_step || fn > fprev)) ? stall + 1 : 0;
    if (stall >= opt.stall_window) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.f = fx;
  res.grad = gx;
  return res;
}

FistaResult gradient_polish(const SmoothFn& f, const Projector& proj, const Vec& x0, int max_iter,
                            double gtol) {
  FistaResult res;
  Vec x = proj(x0), g;
  double fx = eval_or_inf(f, x, &g);
  res.x = x;
  res.f = fx;
  res.grad = g;
  if (!std::isfinite(fx)) return res;
  const double scale = std::max(1.0, g.norm());
  double t = 1.0 / scale;
  double gm = (x - proj(x - g)).norm();
  for (int it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    if (gm <= gtol * scale) {
      res.converged = true;
      break;
    }
    Vec xn, gn;
    double fn = INFINITY, ell = 0.0;
    bool ok = false;
    for (int bt = 0; bt < 60; ++bt) {
      xn = proj(x - t * g);
      double dx = (xn - x).norm();
      if (dx == 0.0) break;
      fn = eval_or_inf(f, xn, &gn);
      if (std::isfinite(fn)) {
        ell = (gn - g).norm() / dx;
        if (t * ell <= 1.0) {
          ok = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!ok) break;
    double gmn = (xn - proj(xn - gn)).norm();
    x = xn;
    g = gn;
    fx = fn;
    gm = gmn;
    if (t * ell < 0.5) t *= 1.5;
  }
  res.x = x;
  res.f = fx;
  res.grad = g;
  res.stationarity = gm;
  return res;
}

Vec dykstra(const std::vector<Projector>& projs, const Vec& x0, const DykstraOptions& opt,
            double* residual) {
  const std::size_t k = projs.size();
  if (k == 0) return x0;
  if (k == 1) {
    if (residual) *residual = 0.0;
    return projs[0](x0);
  }
  std::vector<Vec> incr(k, Vec::Zero(x0.size()));
  Vec x = x0;
  double res = std::numeric_limits<double>::infinity();
  for (int cycle = 0; cycle < opt.max_cycles; ++cycle) {
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      Vec z = x + incr[i];
      Vec p = projs[i](z);
      Vec newincr = z - p;
      change += (newincr - incr[i]).squaredNorm();
      incr[i] = std::move(newincr);
      x = std::move(p);
    }
    // spread of the per-set projections measures infeasibility of x
    res = std::sqrt(change);
    if (res <= opt.tol * std::max(1.0, x.norm())) break;
  }
  if (residual) *residual = res;
  return x;
}

EllipsoidResult ellipsoid_minimize(const SmoothFn& f, const CutFn& cut, const Projector& proj,
                                   const Vec& center, double radius, const Vec& start,
                                   const EllipsoidOptions& opt) {
  const Eigen::Index n = center.size();
  EllipsoidResult res;
  res.x = start;
  res.f = eval_or_inf(f, start, nullptr);
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 400 + 200 * static_cast<int>(n * n);
  const double nn = static_cast<double>(n);
  Vec x = center;
  Mat p = Mat::Identity(n, n) * radius * radius;
  Vec g, a;
  for (int it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    if (cut(x, &a)) {
      double fx = eval_or_inf(f, x, &g);
      if (!std::isfinite(fx)) break;
      if (fx < res.f) {
        res.f = fx;
        res.x = x;
      }
      double w = std::sqrt(std::max(0.0, g.dot(p * g)));
      res.lower = std::max(res.lower, fx - w);
      if (w == 0.0) {
        res.lower = fx;
      }
    } else {
      g = a;
      Vec c = proj(x);
      double fc = eval_or_inf(f, c, nullptr);
      if (fc < res.f) {
        res.f = fc;
        res.x = c;
      }
    }
    if (res.f - res.lower <= opt.rel_tol * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      break;
    }
    Vec pg = p * g;
    double gpg = g.dot(pg);
    if (!(gpg > 0.0) || !std::isfinite(gpg)) break;
    Vec b = pg / std::sqrt(gpg);
    if (n == 1) {
      x -= 0.5 * b;
      p *= 0.25;
    } else {
      x -= b / (nn + 1.0);
      p = (nn * nn / (nn * nn - 1.0)) * (p - (2.0 / (nn + 1.0)) * b * b.transpose());
      p = 0.5 * (p + p.transpose());
    }
  }
  return res;
}

}  // namespace dforge
