#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dforge/errors.hpp"
#include "dforge/regular_data.hpp"

namespace dforge {

struct SaddleOptions {
  double tol = 1e-6;             // relative duality gap
  int max_iter = 100000;         // outer iterations, all phases together
  double radius = 1e3;           // initial truncation of an unbounded H
  double radius_cap = 1e6;
  double degenerate_value = -1e3;
  bool random_start = false;
  std::uint64_t seed = 0;
  std::optional<Vec> h0;
};

// Psi(h; mu1, mu2) = (Phi1(-h; mu1) + Phi2(h; mu2)) / 2.
struct SaddleProblem {
  SaddleProblem(RegularData d1, RegularData d2, SaddleOptions o = {});
  RegularData data1, data2;
  SaddleOptions opt;

  double psi(const Vec& h, const Vec& mu1, const Vec& mu2) const;
};

struct SaddleSolution {
  Vec h_star, mu1_star, mu2_star;
  double sad_val = 0.0;  // Psi at (h*, best responses to h*): an upper bound on the saddle value
  double lower = 0.0;    // certified lower bound from the dual side
  double gap = 0.0;      // sad_val - lower
  int iterations = 0;
  double radius = 0.0;   // truncation radius in effect (inf when H is bounded)
  bool certified = false;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

class SaddleNonConvergence : public NumericError {
 public:
  SaddleNonConvergence(const std::string& what, SaddleSolution best)
      : NumericError(what, best.gap), best_(std::move(best)) {}
  const SaddleSolution& best() const { return best_; }

 private:
  SaddleSolution best_;
};

struct BestResponse {
  Vec mu1, mu2;
  double value = 0.0;
};

// max over M1 x M2 of Psi(h; ., .).
BestResponse best_response(const Vec& h, const SaddleProblem& problem);

// Maximiser of Phi(h; .) over M and its value.
std::pair<Vec, double> maximize_phi(const RegularData& data, const Vec& h,
                                    const std::optional<Vec>& start = std::nullopt);

SaddleSolution solve_saddle(const SaddleProblem& problem);

}  // namespace dforge
