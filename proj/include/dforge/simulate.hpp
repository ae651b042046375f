#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dforge/aggregation.hpp"
#include "dforge/quadlift.hpp"
#include "dforge/sampler.hpp"

namespace dforge {

struct McReport {
  double estimate = 0.0;
  double std_error = 0.0;
  long n = 0;
  std::optional<double> bound;
  bool pass = true;  // estimate <= bound + se_mult * std_error, true without a bound
};

McReport make_report(double estimate, double std_error, long n, std::optional<double> bound,
                     double se_mult = 3.0);

struct McOptions {
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  double se_mult = 3.0;
};

// Exponential-moment runs draw i.i.d. observations in blocks of kMcBlock,
// block b from CounterRng(seed, b). Trial-based runs (tests, aggregation)
// use CounterRng(seed, trial). Either way the output does not depend on
// the thread count.
inline constexpr long kMcBlock = 4096;

// Scores of the columns of a d x n block.
using BatchScore = std::function<Vec(const Mat&)>;

// Mean of exp(score(w)) over n i.i.d. draws, standard error from the
// sample variance.
McReport mc_exp_moment(const Sampler& s, const BatchScore& score, long n,
                       std::optional<double> bound, const McOptions& opt = {});

// E exp(-phi) for side 1, E exp(phi) for side 2, against det.risk.
McReport mc_detector_risk(const AffineDetector& det, const Sampler& s, int side, long n,
                          const McOptions& opt = {});
McReport mc_detector_risk(const QuadDetector& det, const Sampler& s, int side, long n,
                          const McOptions& opt = {});

// Error frequencies of the K-observation pair test, against risk^K. Under
// the second hypothesis a tie counts as an error.
struct PairTestReport {
  McReport h1, h2;
};
PairTestReport mc_test_error(const AffineDetector& det, const Sampler& s1, const Sampler& s2, int K,
                             long trials, const McOptions& opt = {});

// Per true hypothesis j: frequency of rejecting j or accepting a hypothesis
// not close to j, against eps_hat. K comes from the battery.
std::vector<McReport> mc_test_error(const ShiftedBattery& shifted,
                                    const std::vector<SamplerPtr>& samplers, long trials,
                                    const McOptions& opt = {});

// Per true hypothesis j: frequency of not inferring the colour of j
// (undecided counts as wrong), against eps_hat.
std::vector<McReport> mc_color_error(const std::vector<std::vector<int>>& partition,
                                     const ShiftedBattery& shifted,
                                     const std::vector<SamplerPtr>& samplers, long trials,
                                     const McOptions& opt = {});

// Frequency of |G mu - g_hat| > min_l |G mu - g_l| + 2 max_l delta_l,
// against eps. mu must lie in one of the parameter sets.
McReport mc_aggregation(const Aggregator& agg, const Vec& mu, const Sampler& s, long trials,
                        const McOptions& opt = {});
// Same for the sub-Gaussian closed form; truth is G mu = mu there.
McReport mc_aggregation_fast_path(const Mat& theta, const std::vector<Vec>& estimates, int K,
                                  double eps, const Vec& mu, const Sampler& s, long trials,
                                  const McOptions& opt = {});

}  // namespace dforge
