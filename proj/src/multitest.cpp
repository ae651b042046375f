#include "dforge/multitest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dforge/kernels.hpp"
#include "dforge/parallel.hpp"

namespace dforge {

ClosenessRelation::ClosenessRelation(int J) : J_(J) {
  if (J < 1) throw InvalidArgument("closeness relation: need at least one hypothesis");
  rel_.assign(std::size_t(J) * J, 0);
  for (int i = 0; i < J; ++i) rel_[std::size_t(i) * J + i] = 1;
}

ClosenessRelation ClosenessRelation::from_partition(int J,
                                                    const std::vector<std::vector<int>>& blocks) {
  ClosenessRelation c(J);
  std::vector<int> seen(J, 0);
  for (const auto& b : blocks)
    for (int i : b) {
      if (i < 0 || i >= J) throw InvalidArgument("partition: index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw InvalidArgument("partition: index " + std::to_string(i) + " appears twice");
    }
  for (int i = 0; i < J; ++i)
    if (!seen[i]) throw InvalidArgument("partition: index " + std::to_string(i) + " is not covered");
  for (const auto& b : blocks)
    for (int i : b)
      for (int j : b) c.set_close(i, j);
  return c;
}

bool ClosenessRelation::close(int i, int j) const {
  if (i < 0 || j < 0 || i >= J_ || j >= J_) throw InvalidArgument("closeness: index out of range");
  return rel_[std::size_t(i) * J_ + j] != 0;
}

void ClosenessRelation::set_close(int i, int j) {
  if (i < 0 || j < 0 || i >= J_ || j >= J_) throw InvalidArgument("closeness: index out of range");
  rel_[std::size_t(i) * J_ + j] = 1;
  rel_[std::size_t(j) * J_ + i] = 1;
}

PairwiseBattery build_battery(const std::vector<RegularData>& datas, const ClosenessRelation& C,
                              const SaddleOptions& opt, int threads) {
  const int J = static_cast<int>(datas.size());
  if (J < 1) throw InvalidArgument("build_battery: no hypotheses");
  if (C.size() != J)
    throw InvalidArgument("build_battery: closeness relation has size " + std::to_string(C.size()) +
                          " for " + std::to_string(J) + " hypotheses");
  const Eigen::Index d = datas[0].obs_dim();
  for (const auto& x : datas)
    if (x.obs_dim() != d) throw InvalidArgument("build_battery: observation dimensions differ");

  PairwiseBattery b;
  b.J = J;
  b.C = C;
  b.eps = Mat::Ones(J, J);
  AffineDetector zero;
  zero.h = Vec::Zero(d);
  zero.certified = true;
  b.detectors.assign(std::size_t(J) * J, zero);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < J; ++i)
    for (int j = i + 1; j < J; ++j)
      if (!C.close(i, j)) pairs.emplace_back(i, j);

  std::vector<AffineDetector> solved(pairs.size());
  std::vector<std::string> failures(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    auto [i, j] = pairs[k];
    try {
      SaddleProblem p(datas[i], datas[j], opt);
      solved[k] = build_detector(solve_saddle(p), p);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });

  std::ostringstream err;
  int nfail = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!failures[k].empty()) {
      err << (nfail++ ? "; " : "") << "(" << pairs[k].first << "," << pairs[k].second
          << "): " << failures[k];
      continue;
    }
    auto [i, j] = pairs[k];
    AffineDetector& fwd = b.detectors[std::size_t(i) * J + j];
    AffineDetector& bwd = b.detectors[std::size_t(j) * J + i];
    fwd = solved[k];
    bwd = fwd;
    bwd.h = -fwd.h;
    bwd.a = -fwd.a;
    b.eps(i, j) = b.eps(j, i) = fwd.risk;
  }
  if (nfail) throw NumericError("build_battery: pairwise solves failed: " + err.str(), 0.0);
  return b;
}

Mat e_matrix(const PairwiseBattery& b, int K) {
  if (K < 1) throw InvalidArgument("e_matrix: K must be positive");
  Mat E = Mat::Zero(b.J, b.J);
  for (int i = 0; i < b.J; ++i)
    for (int j = 0; j < b.J; ++j)
      if (!b.C.close(i, j)) E(i, j) = std::pow(b.eps(i, j), K);
  return E;
}

namespace {

double spectral_radius_sym(const Mat& E) {
  if (E.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(E, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(E.rows() - 1)));
}

// Perron vector of a symmetric nonnegative matrix by shifted power iteration,
// seeded with |leading eigenvector|.
Vec perron_vector(const Mat& E, int* iters) {
  const Eigen::Index n = E.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(E);
  Vec g = es.eigenvectors().col(n - 1).cwiseAbs();
  if (g.sum() <= 0.0) g = Vec::Ones(n);
  g /= g.sum();
  // the shift keeps -lambda_max from competing on bipartite patterns
  const double shift = 0.5 * E.rowwise().sum().maxCoeff();
  int it = 0;
  for (; it < 100000; ++it) {
    Vec next = E * g + shift * g;
    next /= next.sum();
    double delta = (next - g).cwiseAbs().maxCoeff();
    g = next;
    if (delta <= 1e-12 * g.maxCoeff()) break;
  }
  if (iters) *iters = it;
  return g;
}

}  // namespace

PerronShift perron_shifts(const Mat& E) {
  const Eigen::Index n = E.rows();
  if (E.cols() != n) throw InvalidArgument("perron_shifts: matrix must be square, got " + shape_str(E));
  if (n > 0 && E.minCoeff() < 0.0) throw InvalidArgument("perron_shifts: matrix has negative entries");
  if ((E - E.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, E.cwiseAbs().maxCoeff()))
    throw InvalidArgument("perron_shifts: matrix is not symmetric");
  PerronShift out;
  out.alpha = Mat::Zero(n, n);
  out.g = Vec::Constant(n, n ? 1.0 / n : 0.0);
  if (n == 0 || E.maxCoeff() == 0.0) return out;

  Mat S = sym(E);
  out.eps_hat = spectral_radius_sym(S);
  Vec g = perron_vector(S, &out.iterations);
  if (g.minCoeff() <= 1e-14 * g.maxCoeff()) {
    const double eta = 1e-12 * (S.maxCoeff() + 1.0);
    g = perron_vector(S + eta * Mat::Ones(n, n), &out.iterations);
    out.perturbed = true;
  }
  out.g = g;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double a = std::log(g(i)) - std::log(g(j));
      out.alpha(i, j) = a;
      out.alpha(j, i) = -a;
    }
  return out;
}

ShiftedBattery shift_battery(PairwiseBattery battery, int K) {
  PerronShift ps = perron_shifts(e_matrix(battery, K));
  ShiftedBattery s;
  s.battery = std::move(battery);
  s.alpha = std::move(ps.alpha);
  s.eps_hat = ps.eps_hat;
  s.K = K;
  return s;
}

std::vector<int> run_multitest(const ShiftedBattery& s, const Mat& obs) {
  const PairwiseBattery& b = s.battery;
  const Eigen::Index d = b.detectors.empty() ? 0 : b.detectors[0].h.size();
  if (obs.cols() != s.K)
    throw InvalidArgument("run_multitest: expected " + std::to_string(s.K) + " observations, got " +
                          std::to_string(obs.cols()));
  if (obs.rows() != d)
    throw InvalidArgument("run_multitest: observations have dimension " + std::to_string(obs.rows()) +
                          ", expected " + std::to_string(d));
  // column sums once, then every statistic is h'sum + K a
  Vec total = obs.rowwise().sum();
  Mat stat = Mat::Zero(b.J, b.J);
  for (int i = 0; i < b.J; ++i)
    for (int j = i + 1; j < b.J; ++j) {
      if (b.C.close(i, j)) continue;
      const AffineDetector& det = b.at(i, j);
      double v = kernels::dot(det.h.data(), total.data(), d) + s.K * det.a + s.alpha(i, j);
      stat(i, j) = v;
      stat(j, i) = -v;
    }
  std::vector<int> accepted;
  for (int i = 0; i < b.J; ++i) {
    bool ok = true;
    for (int j = 0; j < b.J && ok; ++j)
      if (!b.C.close(i, j) && !(stat(i, j) > 0.0)) ok = false;
    if (ok) accepted.push_back(i);
  }
  return accepted;
}

std::vector<int> run_multitest(const ShiftedBattery& s, const std::vector<Vec>& obs) {
  const Eigen::Index d = s.battery.detectors.empty() ? 0 : s.battery.detectors[0].h.size();
  Mat m(d, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t t = 0; t < obs.size(); ++t) {
    if (obs[t].size() != d)
      throw InvalidArgument("run_multitest: observation " + std::to_string(t) + " has dimension " +
                            std::to_string(obs[t].size()) + ", expected " + std::to_string(d));
    m.col(static_cast<Eigen::Index>(t)) = obs[t];
  }
  return run_multitest(s, m);
}

std::optional<int> infer_color(const std::vector<std::vector<int>>& partition,
                               const ShiftedBattery& s, const Mat& obs) {
  const int J = s.battery.J;
  ClosenessRelation want = ClosenessRelation::from_partition(J, partition);
  std::vector<int> color(J);
  for (std::size_t c = 0; c < partition.size(); ++c)
    for (int i : partition[c]) color[i] = static_cast<int>(c);
  for (int i = 0; i < J; ++i)
    for (int j = 0; j < J; ++j)
      if (want.close(i, j) != s.battery.C.close(i, j))
        throw InvalidArgument("infer_color: battery closeness is not the same-colour relation");
  std::vector<int> acc = run_multitest(s, obs);
  if (acc.empty()) return std::nullopt;
  return color[acc.front()];
}

int min_k_for_risk(const PairwiseBattery& b, double target) {
  if (!(target > 0.0 && target < 1.0)) throw InvalidArgument("min_k_for_risk: target must lie in (0, 1)");
  double eps_bar = 0.0;
  for (int i = 0; i < b.J; ++i)
    for (int j = 0; j < b.J; ++j)
      if (!b.C.close(i, j)) eps_bar = std::max(eps_bar, b.eps(i, j));
  if (eps_bar == 0.0) return 1;
  if (eps_bar >= 1.0)
    throw Infeasible("min_k_for_risk: some non-close pair has risk 1; no K reaches the target");
  auto norm_at = [&](int K) { return spectral_radius_sym(e_matrix(b, K)); };
  if (norm_at(1) <= target) return 1;
  // ||E^(K)|| <= (J - 1) eps_bar^K gives an upper end
  double kmax = std::ceil(std::log(target / std::max(1, b.J - 1)) / std::log(eps_bar));
  if (!(kmax < 1e9)) throw Infeasible("min_k_for_risk: required K exceeds 1e9");
  int lo = 1, hi = std::max(2, static_cast<int>(kmax));
  while (norm_at(hi) > target) hi *= 2;
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    if (norm_at(mid) <= target)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace dforge
