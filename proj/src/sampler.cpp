#include "dforge/sampler.hpp"

#include <cmath>
#include <sstream>

#include "dforge/errors.hpp"

namespace dforge {

namespace {

class GaussianSampler final : public Sampler {
 public:
  GaussianSampler(Vec theta, const Mat& cov) : theta_(std::move(theta)), root_(sqrtm_psd(sym(cov))) {}
  Eigen::Index dim() const override { return theta_.size(); }
  void draw(CounterRng& rng, const Mat&, Eigen::Ref<Vec> out) const override {
    Vec z(theta_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    out = theta_ + root_ * z;
  }
  std::string describe() const override { return "gaussian(d=" + std::to_string(dim()) + ")"; }

 private:
  Vec theta_;
  Mat root_;
};

class PoissonSampler final : public Sampler {
 public:
  explicit PoissonSampler(Vec mu) : mu_(std::move(mu)) {}
  Eigen::Index dim() const override { return mu_.size(); }
  void draw(CounterRng& rng, const Mat&, Eigen::Ref<Vec> out) const override {
    for (Eigen::Index i = 0; i < mu_.size(); ++i) out(i) = static_cast<double>(poisson_variate(rng, mu_(i)));
  }
  std::string describe() const override { return "poisson(d=" + std::to_string(dim()) + ")"; }

 private:
  Vec mu_;
};

class DiscreteSampler final : public Sampler {
 public:
  explicit DiscreteSampler(const Vec& p) : cdf_(p.size()) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) cdf_(i) = (acc += p(i));
    cdf_ /= acc;
  }
  Eigen::Index dim() const override { return cdf_.size(); }
  void draw(CounterRng& rng, const Mat&, Eigen::Ref<Vec> out) const override {
    double u = rng.uniform();
    Eigen::Index k = 0;
    while (k + 1 < cdf_.size() && u > cdf_(k)) ++k;
    out.setZero();
    out(k) = 1.0;
  }
  std::string describe() const override { return "discrete(d=" + std::to_string(dim()) + ")"; }

 private:
  Vec cdf_;
};

class FnSampler final : public Sampler {
 public:
  FnSampler(Eigen::Index d, std::function<void(CounterRng&, const Mat&, Eigen::Ref<Vec>)> fn,
            std::string name)
      : d_(d), fn_(std::move(fn)), name_(std::move(name)) {}
  Eigen::Index dim() const override { return d_; }
  void draw(CounterRng& rng, const Mat& hist, Eigen::Ref<Vec> out) const override { fn_(rng, hist, out); }
  std::string describe() const override { return name_ + "(d=" + std::to_string(d_) + ")"; }

 private:
  Eigen::Index d_;
  std::function<void(CounterRng&, const Mat&, Eigen::Ref<Vec>)> fn_;
  std::string name_;
};

long poisson_inversion(CounterRng& rng, double mean) {
  const double p0 = std::exp(-mean);
  double u = rng.uniform();
  long k = 0;
  double p = p0, cdf = p0;
  while (u > cdf && k < 10000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Hormann's transformed rejection with squeeze.
long poisson_ptrs(CounterRng& rng, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<long>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + kf * loglam - std::lgamma(kf + 1.0))
      return static_cast<long>(kf);
  }
}

}  // namespace

long poisson_variate(CounterRng& rng, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidArgument("poisson_variate: bad mean");
  if (mean == 0.0) return 0;
  return mean <= 30.0 ? poisson_inversion(rng, mean) : poisson_ptrs(rng, mean);
}

SamplerPtr gaussian_sampler(Vec theta, Mat cov) {
  if (cov.rows() != theta.size() || cov.cols() != theta.size())
    throw InvalidArgument("gaussian_sampler: covariance is " + shape_str(cov) + " for mean of size " +
                          std::to_string(theta.size()));
  if (!is_psd(sym(cov), 1e-10 * std::max(1.0, cov.norm())))
    throw InvalidParameter("gaussian_sampler: covariance is not psd");
  return std::make_shared<GaussianSampler>(std::move(theta), cov);
}

SamplerPtr poisson_sampler(Vec mu) {
  if (mu.size() == 0 || mu.minCoeff() < 0.0) throw InvalidParameter("poisson_sampler: negative mean");
  return std::make_shared<PoissonSampler>(std::move(mu));
}

SamplerPtr discrete_sampler(Vec p) {
  if (p.size() == 0 || p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-9)
    throw InvalidParameter("discrete_sampler: p is not a probability vector");
  return std::make_shared<DiscreteSampler>(p);
}

SamplerPtr custom_sampler(Eigen::Index dim, std::function<void(CounterRng&, Eigen::Ref<Vec>)> fn,
                          std::string name) {
  if (dim < 1 || !fn) throw InvalidArgument("custom_sampler: bad arguments");
  return std::make_shared<FnSampler>(
      dim, [fn](CounterRng& r, const Mat&, Eigen::Ref<Vec> out) { fn(r, out); }, std::move(name));
}

SamplerPtr scenario_sampler(Eigen::Index dim,
                            std::function<void(CounterRng&, const Mat&, Eigen::Ref<Vec>)> fn,
                            std::string name) {
  if (dim < 1 || !fn) throw InvalidArgument("scenario_sampler: bad arguments");
  return std::make_shared<FnSampler>(dim, std::move(fn), std::move(name));
}

Mat draw_block(const Sampler& s, CounterRng& rng, int K) {
  if (K < 1) throw InvalidArgument("draw_block: K must be positive");
  Mat out(s.dim(), K);
  for (int t = 0; t < K; ++t) {
    Vec w(s.dim());
    s.draw(rng, out.leftCols(t), w);
    out.col(t) = w;
  }
  return out;
}

}  // namespace dforge
