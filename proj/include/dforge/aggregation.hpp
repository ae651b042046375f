#pragma once

#include <optional>
#include <vector>

#include "dforge/multitest.hpp"

namespace dforge {

struct AggregationProblem {
  std::vector<RegularData> datas;  // shared H and parameter space, bounded M_i
  Mat G;                           // m x n
  std::vector<Vec> estimates;      // g_1..g_L in R^m, distinct
  int K = 1;
  double eps = 0.1;
  SaddleOptions saddle;
  int threads = 0;
};

// Cells V_l = {g : u_ll'^T g <= v_ll' for all l' != l}.
struct VoronoiGeometry {
  int L = 0;
  std::vector<Vec> u;  // row-major L x L, u[l*L+l'] (zero on the diagonal)
  Mat v;

  const Vec& dir(int l, int lp) const { return u[std::size_t(l) * L + lp]; }
};

VoronoiGeometry voronoi_geometry(const std::vector<Vec>& estimates);

// W^i_l = {mu in M_i : G mu in V_l}.
SetPtr voronoi_cell_set(const AggregationProblem& p, const VoronoiGeometry& geo, int i, int l);
// Blue chunk {mu in W^i_l' : u_ll'^T G mu >= v_ll' + delta}.
SetPtr voronoi_chunk_set(const AggregationProblem& p, const VoronoiGeometry& geo, int i, int l, int lp,
                         double delta);

struct PurifiedProblem {
  AggregationProblem problem;
  std::vector<int> kept;  // original indices of the remaining estimates
};

// Removes redundant estimates one at a time (lowest index first),
// recomputing cells after each removal.
PurifiedProblem purify(const AggregationProblem& p);

// Colour inference between the red sets W^i_l and the blue chunks at
// distance delta.
struct IndividualInference {
  int ell = 0;
  double delta = 0.0;
  int K = 1;
  int n_red = 0, n_blue = 0;
  double risk = 0.0;  // 0 when there is no blue set
  std::optional<ShiftedBattery> battery;

  // true: red. false: blue or undecided.
  bool infers_red(const Mat& observations) const;
};

IndividualInference individual_inference(const AggregationProblem& p, int ell, double delta);

struct DeltaCalibration {
  double delta = 0.0;
  double risk = 0.0;
  int steps = 0;
  bool negligible = false;  // stopped at a delta below 1e-6
};

// delta^i = kappa^i delta^0 with kappa = 0.5 and delta^0 beyond the
// reach of every chunk; keeps halving while risk <= eps / L.
DeltaCalibration calibrate_delta(const AggregationProblem& p, int ell);
// Upper end of the progression: every chunk is empty at this delta.
double initial_delta(const AggregationProblem& p);

struct Aggregator {
  AggregationProblem problem;
  std::vector<IndividualInference> procedures;
  std::vector<double> deltas;
};

// Calibrated deltas, or the given ones when supplied.
Aggregator build_aggregator(const AggregationProblem& p,
                            const std::optional<std::vector<double>>& deltas = std::nullopt);

struct AggregationResult {
  int index = 0;               // chosen estimate (lowest red index, else 0)
  std::vector<char> red;       // per estimate
};

AggregationResult aggregate(const Aggregator& agg, const Mat& observations);

// I = 1, G = identity, sub-Gaussian with known Theta.
std::vector<double> fast_path_deltas(const Mat& theta, const std::vector<Vec>& estimates, int K,
                                     double eps);
AggregationResult subgaussian_fast_path(const Mat& theta, const std::vector<Vec>& estimates, int K,
                                        double eps, const Mat& observations);

}  // namespace dforge
