#include "dforge/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dforge/errors.hpp"
#include "dforge/parallel.hpp"

namespace dforge {

namespace {

constexpr long kMinTrials = 1000;

void check_count(long n, const char* who) {
  if (n < kMinTrials)
    throw InvalidArgument(std::string(who) + ": need at least " + std::to_string(kMinTrials) +
                          " trials, got " + std::to_string(n));
}

void check_dim(const Sampler& s, Eigen::Index d, const char* who) {
  if (s.dim() != d)
    throw InvalidArgument(std::string(who) + ": sampler dimension " + std::to_string(s.dim()) +
                          " does not match the detector dimension " + std::to_string(d));
}

struct Moments {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double dx = x - mean;
    mean += dx / n;
    m2 += dx * (x - mean);
  }
  // Chan et al. pairwise update; order of merges is fixed by the caller.
  void merge(const Moments& o) {
    if (o.n == 0) return;
    long t = n + o.n;
    double dx = o.mean - mean;
    mean += dx * o.n / t;
    m2 += o.m2 + dx * dx * (double(n) * o.n / t);
    n = t;
  }
};

// Bernoulli frequency over trials; fail(rng, t) is evaluated on stream t.
template <class Fn>
McReport frequency(long trials, double bound, const McOptions& opt, Fn&& fail) {
  std::vector<char> hit(static_cast<std::size_t>(trials), 0);
  parallel_for(hit.size(), opt.threads, [&](std::size_t t) {
    CounterRng rng(opt.seed, t);
    hit[t] = fail(rng, static_cast<long>(t)) ? 1 : 0;
  });
  long k = 0;
  for (char c : hit) k += c;
  double p = double(k) / trials;
  return make_report(p, std::sqrt(p * (1.0 - p) / trials), trials, bound, opt.se_mult);
}

std::vector<McReport> per_hypothesis(const ShiftedBattery& shifted,
                                     const std::vector<SamplerPtr>& samplers, long trials,
                                     const McOptions& opt, const char* who,
                                     const std::function<bool(int, const Mat&)>& fail) {
  check_count(trials, who);
  const int J = shifted.battery.J;
  if (static_cast<int>(samplers.size()) != J)
    throw InvalidArgument(std::string(who) + ": need one sampler per hypothesis (" + std::to_string(J) +
                          "), got " + std::to_string(samplers.size()));
  if (shifted.K < 1) throw InvalidArgument(std::string(who) + ": K must be positive");
  const Eigen::Index d = shifted.battery.detectors.empty() ? 0 : shifted.battery.detectors[0].h.size();
  std::vector<McReport> out;
  for (int j = 0; j < J; ++j) {
    if (!samplers[j]) throw InvalidArgument(std::string(who) + ": sampler " + std::to_string(j) + " is null");
    check_dim(*samplers[j], d, who);
    McOptions o = opt;
    o.seed = derive_seed(opt.seed, static_cast<std::uint64_t>(j));
    out.push_back(frequency(trials, shifted.eps_hat, o, [&](CounterRng& rng, long) {
      return fail(j, draw_block(*samplers[j], rng, shifted.K));
    }));
  }
  return out;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

bool violates(const std::vector<Vec>& g, const Vec& truth, int chosen, double dmax) {
  double best = INFINITY;
  for (const Vec& x : g) best = std::min(best, (x - truth).norm());
  return (g[chosen] - truth).norm() > best + 2.0 * dmax;
}

}  // namespace

McReport make_report(double estimate, double std_error, long n, std::optional<double> bound,
                     double se_mult) {
  if (!(std_error >= 0.0)) throw InvalidArgument("McReport: standard error must be nonnegative");
  McReport r;
  r.estimate = estimate;
  r.std_error = std_error;
  r.n = n;
  r.bound = bound;
  r.pass = !bound || estimate <= *bound + se_mult * std_error;
  return r;
}

McReport mc_exp_moment(const Sampler& s, const BatchScore& score, long n, std::optional<double> bound,
                       const McOptions& opt) {
  check_count(n, "mc_exp_moment");
  const long nb = (n + kMcBlock - 1) / kMcBlock;
  std::vector<Moments> parts(static_cast<std::size_t>(nb));
  const Mat none(s.dim(), 0);
  parallel_for(parts.size(), opt.threads, [&](std::size_t b) {
    const long cnt = std::min(kMcBlock, n - static_cast<long>(b) * kMcBlock);
    CounterRng rng(opt.seed, b);
    Mat obs(s.dim(), cnt);
    for (long j = 0; j < cnt; ++j) s.draw(rng, none, obs.col(j));
    Vec sc = score(obs);
    if (sc.size() != cnt) throw InvalidArgument("mc_exp_moment: score returned the wrong length");
    Moments m;
    for (long j = 0; j < cnt; ++j) m.add(std::exp(sc(j)));
    parts[b] = m;
  });
  Moments all;
  for (const Moments& m : parts) all.merge(m);
  double var = all.n > 1 ? all.m2 / (all.n - 1) : 0.0;
  return make_report(all.mean, std::sqrt(var / all.n), all.n, bound, opt.se_mult);
}

McReport mc_detector_risk(const AffineDetector& det, const Sampler& s, int side, long n,
                          const McOptions& opt) {
  if (side != 1 && side != 2) throw InvalidArgument("mc_detector_risk: side must be 1 or 2");
  check_dim(s, det.h.size(), "mc_detector_risk");
  const double sign = side == 1 ? -1.0 : 1.0;
  return mc_exp_moment(s, [&](const Mat& obs) -> Vec { return sign * det.scores(obs); }, n, det.risk, opt);
}

McReport mc_detector_risk(const QuadDetector& det, const Sampler& s, int side, long n,
                          const McOptions& opt) {
  if (side != 1 && side != 2) throw InvalidArgument("mc_detector_risk: side must be 1 or 2");
  check_dim(s, det.h.size(), "mc_detector_risk");
  const double sign = side == 1 ? -1.0 : 1.0;
  return mc_exp_moment(s, [&](const Mat& obs) -> Vec { return sign * det.scores(obs); }, n, det.risk, opt);
}

PairTestReport mc_test_error(const AffineDetector& det, const Sampler& s1, const Sampler& s2, int K,
                             long trials, const McOptions& opt) {
  if (K < 1) throw InvalidArgument("mc_test_error: K must be positive, got " + std::to_string(K));
  check_count(trials, "mc_test_error");
  check_dim(s1, det.h.size(), "mc_test_error");
  check_dim(s2, det.h.size(), "mc_test_error");
  const double bound = risk_after_K(det.risk, K);
  PairTestReport r;
  McOptions o = opt;
  o.seed = derive_seed(opt.seed, 0);
  r.h1 = frequency(trials, bound, o, [&](CounterRng& rng, long) {
    return decide(apply_repeated(det, draw_block(s1, rng, K))).accepted != Accept::H1;
  });
  o.seed = derive_seed(opt.seed, 1);
  r.h2 = frequency(trials, bound, o, [&](CounterRng& rng, long) {
    return decide(apply_repeated(det, draw_block(s2, rng, K))).accepted != Accept::H2;
  });
  return r;
}

std::vector<McReport> mc_test_error(const ShiftedBattery& shifted, const std::vector<SamplerPtr>& samplers,
                                    long trials, const McOptions& opt) {
  const ClosenessRelation& C = shifted.battery.C;
  return per_hypothesis(shifted, samplers, trials, opt, "mc_test_error", [&](int j, const Mat& obs) {
    std::vector<int> acc = run_multitest(shifted, obs);
    bool found = false;
    for (int i : acc) {
      if (i == j) found = true;
      if (!C.close(i, j)) return true;
    }
    return !found;
  });
}

std::vector<McReport> mc_color_error(const std::vector<std::vector<int>>& partition,
                                     const ShiftedBattery& shifted, const std::vector<SamplerPtr>& samplers,
                                     long trials, const McOptions& opt) {
  std::vector<int> color(static_cast<std::size_t>(shifted.battery.J), -1);
  for (std::size_t c = 0; c < partition.size(); ++c)
    for (int j : partition[c]) {
      if (j < 0 || j >= shifted.battery.J || color[j] != -1)
        throw InvalidArgument("mc_color_error: partition must cover each hypothesis exactly once");
      color[j] = static_cast<int>(c);
    }
  for (int c : color)
    if (c < 0) throw InvalidArgument("mc_color_error: partition must cover each hypothesis exactly once");
  return per_hypothesis(shifted, samplers, trials, opt, "mc_color_error", [&](int j, const Mat& obs) {
    std::optional<int> got = infer_color(partition, shifted, obs);
    return !got || *got != color[j];
  });
}

McReport mc_aggregation(const Aggregator& agg, const Vec& mu, const Sampler& s, long trials,
                        const McOptions& opt) {
  check_count(trials, "mc_aggregation");
  const AggregationProblem& p = agg.problem;
  if (p.datas.empty() || agg.deltas.size() != p.estimates.size())
    throw InvalidArgument("mc_aggregation: aggregator is not built");
  if (mu.size() != p.G.cols())
    throw InvalidArgument("mc_aggregation: truth has dimension " + std::to_string(mu.size()) + ", G has " +
                          std::to_string(p.G.cols()) + " columns");
  bool inside = false;
  for (const RegularData& r : p.datas) inside = inside || r.M().contains(mu, 1e-9);
  if (!inside) throw InvalidArgument("mc_aggregation: truth lies in none of the parameter sets");
  check_dim(s, p.datas[0].obs_dim(), "mc_aggregation");
  const Vec truth = p.G * mu;
  const double dmax = max_of(agg.deltas);
  return frequency(trials, p.eps, opt, [&](CounterRng& rng, long) {
    return violates(p.estimates, truth, aggregate(agg, draw_block(s, rng, p.K)).index, dmax);
  });
}

McReport mc_aggregation_fast_path(const Mat& theta, const std::vector<Vec>& estimates, int K, double eps,
                                  const Vec& mu, const Sampler& s, long trials, const McOptions& opt) {
  check_count(trials, "mc_aggregation_fast_path");
  const std::vector<double> deltas = fast_path_deltas(theta, estimates, K, eps);
  if (mu.size() != theta.rows()) throw InvalidArgument("mc_aggregation_fast_path: truth has the wrong dimension");
  check_dim(s, theta.rows(), "mc_aggregation_fast_path");
  const double dmax = max_of(deltas);
  return frequency(trials, eps, opt, [&](CounterRng& rng, long) {
    int idx = subgaussian_fast_path(theta, estimates, K, eps, draw_block(s, rng, K)).index;
    return violates(estimates, mu, idx, dmax);
  });
}

}  // namespace dforge
