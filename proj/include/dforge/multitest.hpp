#pragma once

#include <optional>
#include <vector>

#include "dforge/detector.hpp"

namespace dforge {

// Symmetric, reflexive relation on {0, ..., J-1}.
class ClosenessRelation {
 public:
  explicit ClosenessRelation(int J);
  static ClosenessRelation diagonal(int J) { return ClosenessRelation(J); }
  // i ~ j iff i and j share a block; blocks must partition {0..J-1}.
  static ClosenessRelation from_partition(int J, const std::vector<std::vector<int>>& blocks);

  int size() const { return J_; }
  bool close(int i, int j) const;
  void set_close(int i, int j);

 private:
  int J_;
  std::vector<char> rel_;
};

// phi_ij = -phi_ji; close pairs carry phi = 0 and eps = 1.
struct PairwiseBattery {
  int J = 0;
  ClosenessRelation C{1};
  std::vector<AffineDetector> detectors;  // row-major J x J
  Mat eps;

  const AffineDetector& at(int i, int j) const { return detectors[std::size_t(i) * J + j]; }
};

// threads = 0 uses the hardware concurrency.
PairwiseBattery build_battery(const std::vector<RegularData>& datas, const ClosenessRelation& C,
                              const SaddleOptions& opt = {}, int threads = 0);

Mat e_matrix(const PairwiseBattery& battery, int K);

struct PerronShift {
  Mat alpha;           // skew-symmetric, alpha_ij = ln(g_i / g_j)
  double eps_hat = 0;  // spectral norm of E
  Vec g;               // positive Perron vector used for the shifts
  bool perturbed = false;
  int iterations = 0;
};

PerronShift perron_shifts(const Mat& E);

struct ShiftedBattery {
  PairwiseBattery battery;
  Mat alpha;
  double eps_hat = 0.0;
  int K = 1;
  // eps_hat >= 1 carries no guarantee
  bool vacuous() const { return eps_hat >= 1.0; }
};

ShiftedBattery shift_battery(PairwiseBattery battery, int K);

// Indices i with sum_t phi_ij(w_t) + alpha_ij > 0 for every j not close to i.
// Observations are the K columns of a d x K block.
std::vector<int> run_multitest(const ShiftedBattery& shifted, const Mat& observations);
std::vector<int> run_multitest(const ShiftedBattery& shifted, const std::vector<Vec>& observations);

// Colour of the accepted hypotheses, or nullopt (undecided). The battery's
// closeness must be the same-colour relation of the partition.
std::optional<int> infer_color(const std::vector<std::vector<int>>& partition,
                               const ShiftedBattery& shifted, const Mat& observations);

// Smallest K with ||E^(K)|| <= target.
int min_k_for_risk(const PairwiseBattery& battery, double target);

}  // namespace dforge
