#include "dforge/aggregation.hpp"

#include <cmath>
#include <sstream>

#include "dforge/parallel.hpp"

namespace dforge {

namespace {

constexpr double kEmptyTol = 1e-7;

void check_problem(const AggregationProblem& p) {
  if (p.datas.empty()) throw InvalidArgument("aggregation: no families");
  const Eigen::Index n = p.datas[0].param_dim(), d = p.datas[0].obs_dim();
  for (const auto& x : p.datas)
    if (x.param_dim() != n || x.obs_dim() != d)
      throw InvalidArgument("aggregation: families must share observation and parameter spaces");
  if (p.G.cols() != n)
    throw InvalidArgument("aggregation: G is " + shape_str(p.G) + ", expected " +
                          std::to_string(n) + " columns");
  for (const Vec& g : p.estimates)
    if (g.size() != p.G.rows())
      throw InvalidArgument("aggregation: estimate dimension differs from the rows of G");
  if (p.K < 1) throw InvalidArgument("aggregation: K must be positive");
  if (!(p.eps > 0.0 && p.eps < 0.5)) throw InvalidArgument("aggregation: eps must lie in (0, 1/2)");
}

// rows (G'u_ll')' and right-hand sides v_ll' describing W^i_l
void cell_constraints(const AggregationProblem& p, const VoronoiGeometry& geo, int l, Mat* a, Vec* b) {
  const Eigen::Index n = p.G.cols();
  a->resize(geo.L - 1, n);
  b->resize(geo.L - 1);
  int r = 0;
  for (int lp = 0; lp < geo.L; ++lp) {
    if (lp == l) continue;
    a->row(r) = (p.G.transpose() * geo.dir(l, lp)).transpose();
    (*b)(r) = geo.v(l, lp);
    ++r;
  }
}

bool empty_set(const SetPtr& s) {
  auto h = std::dynamic_pointer_cast<const HalfSpaceIntersection>(s);
  return h && h->is_empty(kEmptyTol);
}

}  // namespace

VoronoiGeometry voronoi_geometry(const std::vector<Vec>& g) {
  const int L = static_cast<int>(g.size());
  if (L < 1) throw InvalidArgument("voronoi_geometry: no estimates");
  VoronoiGeometry geo;
  geo.L = L;
  geo.u.assign(std::size_t(L) * L, Vec::Zero(g[0].size()));
  geo.v = Mat::Zero(L, L);
  for (int l = 0; l < L; ++l)
    for (int lp = 0; lp < L; ++lp) {
      if (l == lp) continue;
      if (g[lp].size() != g[l].size()) throw InvalidArgument("voronoi_geometry: dimension mismatch");
      Vec diff = g[lp] - g[l];
      double nrm = diff.norm();
      if (nrm == 0.0)
        throw InvalidArgument("voronoi_geometry: estimates " + std::to_string(l) + " and " +
                              std::to_string(lp) + " coincide");
      Vec u = diff / nrm;
      geo.u[std::size_t(l) * L + lp] = u;
      geo.v(l, lp) = 0.5 * u.dot(g[lp] + g[l]);
    }
  return geo;
}

SetPtr voronoi_cell_set(const AggregationProblem& p, const VoronoiGeometry& geo, int i, int l) {
  Mat a;
  Vec b;
  cell_constraints(p, geo, l, &a, &b);
  return std::make_shared<HalfSpaceIntersection>(p.datas[i].M_ptr(), a, b);
}

SetPtr voronoi_chunk_set(const AggregationProblem& p, const VoronoiGeometry& geo, int i, int l, int lp,
                         double delta) {
  Mat a;
  Vec b;
  cell_constraints(p, geo, lp, &a, &b);
  Mat a2(a.rows() + 1, a.cols());
  Vec b2(b.size() + 1);
  a2.topRows(a.rows()) = a;
  b2.head(b.size()) = b;
  a2.row(a.rows()) = -(p.G.transpose() * geo.dir(l, lp)).transpose();
  b2(b.size()) = -(geo.v(l, lp) + delta);
  return std::make_shared<HalfSpaceIntersection>(p.datas[i].M_ptr(), a2, b2);
}

PurifiedProblem purify(const AggregationProblem& p0) {
  check_problem(p0);
  PurifiedProblem out{p0, {}};
  for (int l = 0; l < static_cast<int>(p0.estimates.size()); ++l) out.kept.push_back(l);
  for (;;) {
    AggregationProblem& p = out.problem;
    if (p.estimates.size() < 2)
      throw DegenerateInput("purify: fewer than two non-redundant estimates remain");
    VoronoiGeometry geo = voronoi_geometry(p.estimates);
    int redundant = -1;
    for (int l = 0; l < geo.L && redundant < 0; ++l) {
      bool any = false;
      for (std::size_t i = 0; i < p.datas.size() && !any; ++i)
        any = !empty_set(voronoi_cell_set(p, geo, static_cast<int>(i), l));
      if (!any) redundant = l;
    }
    if (redundant < 0) return out;
    p.estimates.erase(p.estimates.begin() + redundant);
    out.kept.erase(out.kept.begin() + redundant);
  }
}

bool IndividualInference::infers_red(const Mat& obs) const {
  if (!battery) {
    if (obs.cols() != K) throw InvalidArgument("individual inference: wrong number of observations");
    return true;
  }
  std::vector<std::vector<int>> parts(2);
  for (int s = 0; s < n_red; ++s) parts[0].push_back(s);
  for (int s = 0; s < n_blue; ++s) parts[1].push_back(n_red + s);
  std::optional<int> c = infer_color(parts, *battery, obs);
  return c && *c == 0;
}

IndividualInference individual_inference(const AggregationProblem& p, int ell, double delta) {
  check_problem(p);
  if (!(delta > 0.0)) throw InvalidArgument("individual_inference: delta must be positive");
  const int L = static_cast<int>(p.estimates.size());
  if (ell < 0 || ell >= L) throw InvalidArgument("individual_inference: estimate index out of range");
  VoronoiGeometry geo = voronoi_geometry(p.estimates);
  std::vector<RegularData> red, blue;
  for (std::size_t i = 0; i < p.datas.size(); ++i) {
    SetPtr w = voronoi_cell_set(p, geo, static_cast<int>(i), ell);
    if (!empty_set(w)) red.push_back(p.datas[i].with_param_set(w));
  }
  for (int lp = 0; lp < L; ++lp) {
    if (lp == ell) continue;
    for (std::size_t i = 0; i < p.datas.size(); ++i) {
      SetPtr w = voronoi_chunk_set(p, geo, static_cast<int>(i), ell, lp, delta);
      if (!empty_set(w)) blue.push_back(p.datas[i].with_param_set(w));
    }
  }
  IndividualInference ii;
  ii.ell = ell;
  ii.delta = delta;
  ii.K = p.K;
  ii.n_red = static_cast<int>(red.size());
  ii.n_blue = static_cast<int>(blue.size());
  if (blue.empty()) return ii;
  if (red.empty())
    throw DegenerateInput("individual_inference: estimate " + std::to_string(ell) +
                          " is redundant; purify the problem first");
  std::vector<RegularData> all = red;
  all.insert(all.end(), blue.begin(), blue.end());
  std::vector<std::vector<int>> parts(2);
  for (int s = 0; s < ii.n_red; ++s) parts[0].push_back(s);
  for (int s = 0; s < ii.n_blue; ++s) parts[1].push_back(ii.n_red + s);
  ClosenessRelation C = ClosenessRelation::from_partition(static_cast<int>(all.size()), parts);
  try {
    ii.battery = shift_battery(build_battery(all, C, p.saddle, 1), p.K);
  } catch (const NumericError& e) {
    std::ostringstream os;
    os << "individual_inference(l=" << ell << ", delta=" << delta << "): " << e.what();
    throw NumericError(os.str(), e.residual());
  }
  ii.risk = ii.battery->eps_hat;
  return ii;
}

double initial_delta(const AggregationProblem& p) {
  check_problem(p);
  double rmax = 0.0;
  for (const auto& x : p.datas) {
    auto r = x.M().bound_radius();
    if (!r) throw CapabilityError("aggregation: parameter sets must be bounded (" + x.M().describe() + ")");
    rmax = std::max(rmax, *r);
  }
  VoronoiGeometry geo = voronoi_geometry(p.estimates);
  // u'G mu <= ||G|| R on every M_i, so chunks are empty once delta > ||G|| R - v
  double gnorm = spectral_norm(p.G);
  return 2.0 * gnorm * rmax + std::max(0.0, -geo.v.minCoeff()) + 1.0;
}

DeltaCalibration calibrate_delta(const AggregationProblem& p, int ell) {
  constexpr double kappa = 0.5;
  constexpr double negligible = 1e-6;
  const double budget = p.eps / static_cast<double>(p.estimates.size());
  DeltaCalibration c;
  c.delta = initial_delta(p);
  c.risk = individual_inference(p, ell, c.delta).risk;
  for (;;) {
    double next = kappa * c.delta;
    double r = individual_inference(p, ell, next).risk;
    ++c.steps;
    if (r > budget) return c;
    c.delta = next;
    c.risk = r;
    if (next < negligible) {
      c.negligible = true;
      return c;
    }
  }
}

Aggregator build_aggregator(const AggregationProblem& p0, const std::optional<std::vector<double>>& deltas) {
  check_problem(p0);
  Aggregator agg;
  agg.problem = p0;
  const std::size_t L = p0.estimates.size();
  if (deltas && deltas->size() != L)
    throw InvalidArgument("build_aggregator: need one delta per estimate");
  agg.procedures.resize(L);
  agg.deltas.resize(L);
  parallel_for(L, p0.threads, [&](std::size_t l) {
    double d = deltas ? (*deltas)[l] : calibrate_delta(p0, static_cast<int>(l)).delta;
    agg.deltas[l] = d;
    agg.procedures[l] = individual_inference(p0, static_cast<int>(l), d);
  });
  return agg;
}

AggregationResult aggregate(const Aggregator& agg, const Mat& obs) {
  const std::size_t L = agg.procedures.size();
  AggregationResult r;
  r.red.assign(L, 0);
  for (std::size_t l = 0; l < L; ++l) r.red[l] = agg.procedures[l].infers_red(obs) ? 1 : 0;
  for (std::size_t l = 0; l < L; ++l)
    if (r.red[l]) {
      r.index = static_cast<int>(l);
      break;
    }
  return r;
}

std::vector<double> fast_path_deltas(const Mat& theta, const std::vector<Vec>& g, int K, double eps) {
  const int L = static_cast<int>(g.size());
  if (L < 2) throw InvalidArgument("fast path: need at least two estimates");
  if (K < 1) throw InvalidArgument("fast path: K must be positive");
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidArgument("fast path: eps must lie in (0, 1/2)");
  if (theta.rows() != g[0].size() || theta.cols() != g[0].size())
    throw InvalidArgument("fast path: Theta is " + shape_str(theta) + " for estimates of dimension " +
                          std::to_string(g[0].size()));
  if (min_eigenvalue(sym(theta)) <= 0.0) throw InvalidParameter("fast path: Theta must be positive definite");
  const double arg = L * std::sqrt(static_cast<double>(L - 1)) / (eps * K);
  if (!(arg > 1.0))
    throw InvalidArgument("fast path: eps K >= L sqrt(L-1) makes the logarithm nonpositive");
  const double lg = std::log(arg);
  VoronoiGeometry geo = voronoi_geometry(g);
  std::vector<double> out(L, 0.0);
  for (int l = 0; l < L; ++l)
    for (int lp = 0; lp < L; ++lp) {
      if (lp == l) continue;
      const Vec& u = geo.dir(l, lp);
      out[l] = std::max(out[l], std::sqrt(lg * u.dot(theta * u)));
    }
  return out;
}

AggregationResult subgaussian_fast_path(const Mat& theta, const std::vector<Vec>& g, int K, double eps,
                                        const Mat& obs) {
  std::vector<double> delta = fast_path_deltas(theta, g, K, eps);
  const int L = static_cast<int>(g.size());
  if (obs.cols() != K || obs.rows() != g[0].size())
    throw InvalidArgument("fast path: observations must be " + std::to_string(g[0].size()) + " x " +
                          std::to_string(K) + ", got " + shape_str(obs));
  VoronoiGeometry geo = voronoi_geometry(g);
  Vec total = obs.rowwise().sum();
  const double shift = 0.5 * std::log(static_cast<double>(L - 1));
  AggregationResult r;
  r.red.assign(L, 0);
  for (int l = 0; l < L; ++l) {
    bool red = true;
    for (int lp = 0; lp < L && red; ++lp) {
      if (lp == l) continue;
      const Vec& u = geo.dir(l, lp);
      Vec w = 0.5 * (g[l] + g[lp] + delta[l] * u);
      double psi = delta[l] / (2.0 * u.dot(theta * u)) * u.dot(K * w - total) + shift;
      red = psi > 0.0;
    }
    r.red[l] = red ? 1 : 0;
  }
  for (int l = 0; l < L; ++l)
    if (r.red[l]) {
      r.index = l;
      break;
    }
  return r;
}

}  // namespace dforge
