#pragma once

#include <functional>
#include <memory>
#include <string>

#include "dforge/linalg.hpp"
#include "dforge/rng.hpp"

namespace dforge {

// Observation generator. Stateless: randomness comes from the caller's
// CounterRng, so a (seed, stream) pair fixes the draw sequence.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual Eigen::Index dim() const = 0;
  // `history` holds the previous observations of the current stream as
  // columns (used only by scenario samplers).
  virtual void draw(CounterRng& rng, const Mat& history, Eigen::Ref<Vec> out) const = 0;
  virtual std::string describe() const = 0;
};
using SamplerPtr = std::shared_ptr<const Sampler>;

// N(theta, cov); cov must be psd.
SamplerPtr gaussian_sampler(Vec theta, Mat cov);
// Independent Poisson coordinates with means mu.
SamplerPtr poisson_sampler(Vec mu);
// Basic orth e_i with probability p_i.
SamplerPtr discrete_sampler(Vec p);
SamplerPtr custom_sampler(Eigen::Index dim, std::function<void(CounterRng&, Eigen::Ref<Vec>)> fn,
                          std::string name = "custom");
// Conditional law of the next observation given the history.
SamplerPtr scenario_sampler(Eigen::Index dim,
                            std::function<void(CounterRng&, const Mat&, Eigen::Ref<Vec>)> fn,
                            std::string name = "scenario");

// K observations as the columns of a dim x K block.
Mat draw_block(const Sampler& s, CounterRng& rng, int K);

// Poisson variate: inversion for mean <= 30, PTRS rejection above.
long poisson_variate(CounterRng& rng, double mean);

}  // namespace dforge
