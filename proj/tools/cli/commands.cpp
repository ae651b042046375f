#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dforge/convex_set.hpp"
#include "dforge/errors.hpp"
#include "dforge/linalg.hpp"

namespace dforge::cli {

namespace {

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Vec r = m.row(i).transpose();
    rows.push_back(to_json(r));
  }
  return rows;
}

json to_json(const McReport& r, const std::string& name) {
  return {{"name", name},
          {"estimate", r.estimate},
          {"std_error", r.std_error},
          {"n", r.n},
          {"bound", r.bound ? json(*r.bound) : json(nullptr)},
          {"pass", r.pass}};
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sub(const std::string& a, const std::string& b) { return a + "." + b; }
std::string idx(const std::string& a, std::size_t i) { return a + "[" + std::to_string(i) + "]"; }

struct Context {
  json cfg;
  RunOptions opt;
  std::uint64_t seed = 0;
  SaddleOptions saddle;
  QuadSolveOptions quad;
  std::vector<Family> families;
  RunReport out;
  std::uint64_t mc_runs = 0;

  const json& block(const std::string& name) const {
    static const json empty = json::object();
    const json* b = optional_field(cfg, name);
    if (!b) return empty;
    if (!b->is_object()) throw ConfigError(name, "expected an object");
    return *b;
  }
  McOptions mc_options() {
    McOptions o;
    o.seed = derive_seed(seed, mc_runs++);
    o.threads = opt.threads;
    return o;
  }
  void add_mc(const std::string& name, const McReport& r) {
    out.mc.push_back({name, r});
    if (!r.pass) warn("Monte Carlo check '" + name + "' exceeds its bound by more than 3 standard errors");
  }
  void warn(const std::string& w) { out.warnings.push_back(w); }
  const Family& family(long i, const std::string& path) const {
    if (i < 0 || i >= static_cast<long>(families.size()))
      throw ConfigError(path, "family index " + std::to_string(i) + " out of range (" +
                                  std::to_string(families.size()) + " families)");
    return families[static_cast<std::size_t>(i)];
  }
};

void parse_solver(Context& c) {
  const json& s = c.block("solver");
  allow_keys(s, "solver", {"tol", "max_iter", "radius", "quad_max_iter"});
  if (const json* t = optional_field(s, "tol")) c.saddle.tol = get_number(*t, "solver.tol");
  if (c.opt.tol) c.saddle.tol = *c.opt.tol;
  if (!(c.saddle.tol > 0.0 && c.saddle.tol < 1.0)) throw ConfigError("solver.tol", "must lie in (0, 1)");
  if (const json* t = optional_field(s, "max_iter"))
    c.saddle.max_iter = static_cast<int>(get_integer(*t, "solver.max_iter", 1, 100000000));
  if (const json* t = optional_field(s, "radius")) {
    c.saddle.radius = get_number(*t, "solver.radius");
    if (!(c.saddle.radius > 0.0)) throw ConfigError("solver.radius", "must be positive");
    c.saddle.radius_cap = std::max(c.saddle.radius_cap, c.saddle.radius);
  }
  c.quad.tol = c.saddle.tol;
  if (const json* t = optional_field(s, "quad_max_iter"))
    c.quad.max_iter = static_cast<int>(get_integer(*t, "solver.quad_max_iter", 1, 100000000));
}

long mc_trials(const json& mc, const std::string& path, long dflt) {
  if (const json* t = optional_field(mc, "trials")) return get_integer(*t, sub(path, "trials"), 1000, 100000000);
  return dflt;
}

// K from "K" or the smallest K reaching "target_risk".
struct KChoice {
  std::optional<int> K;
  std::optional<double> target;
};

KChoice parse_k(const json& b, const std::string& path, bool required) {
  KChoice k;
  if (const json* v = optional_field(b, "K")) k.K = static_cast<int>(get_integer(*v, sub(path, "K"), 1, 1000000000));
  if (const json* v = optional_field(b, "target_risk")) {
    k.target = get_number(*v, sub(path, "target_risk"));
    if (!(*k.target > 0.0 && *k.target < 1.0)) throw ConfigError(sub(path, "target_risk"), "must lie in (0, 1)");
  }
  if (k.K && k.target) throw ConfigError(path, "give K or target_risk, not both");
  if (required && !k.K && !k.target) throw ConfigError(path, "needs K or target_risk");
  return k;
}

json detector_json(const AffineDetector& d) {
  return {{"h", to_json(d.h)}, {"a", d.a}, {"risk", d.risk}, {"gap", d.gap}, {"certified", d.certified}};
}

// ---- pair

void cmd_pair(Context& c) {
  const json& b = c.block("pair");
  allow_keys(b, "pair", {"families", "K", "target_risk", "mc"});
  long i = 0, j = 1;
  if (const json* f = optional_field(b, "families")) {
    if (!f->is_array() || f->size() != 2) throw ConfigError("pair.families", "expected two family indices");
    i = get_integer((*f)[0], "pair.families[0]", 0, 1 << 20);
    j = get_integer((*f)[1], "pair.families[1]", 0, 1 << 20);
  }
  const Family& f1 = c.family(i, "pair.families[0]");
  const Family& f2 = c.family(j, "pair.families[1]");
  if (f1.dim != f2.dim) throw ConfigError("pair.families", "families have different observation dimensions");
  KChoice kc = parse_k(b, "pair", false);
  const json* mc = optional_field(b, "mc");
  std::optional<Vec> truth[2];
  if (mc) {
    allow_keys(*mc, "pair.mc", {"trials", "truth"});
    if (const json* t = optional_field(*mc, "truth")) {
      if (!t->is_array() || t->size() != 2) throw ConfigError("pair.mc.truth", "expected two parameter vectors");
      truth[0] = get_vector((*t)[0], "pair.mc.truth[0]", f1.data.param_dim());
      truth[1] = get_vector((*t)[1], "pair.mc.truth[1]", f2.data.param_dim());
      family_sampler(f1, *truth[0], "pair.mc.truth[0]");
      family_sampler(f2, *truth[1], "pair.mc.truth[1]");
    }
  }
  if (c.opt.validate_only) return;

  SaddleProblem p(f1.data, f2.data, c.saddle);
  SaddleSolution s = solve_saddle(p);
  AffineDetector det = build_detector(s, p);
  json r;
  r["detector"] = detector_json(det);
  r["saddle"] = {{"value", s.sad_val},
                 {"lower", s.lower},
                 {"gap", s.gap},
                 {"iterations", s.iterations},
                 {"mu1", to_json(s.mu1_star)},
                 {"mu2", to_json(s.mu2_star)}};
  if (det.risk >= 1.0 - 1e-9) c.warn("hypotheses indistinguishable (risk 1)");
  if (kc.K) {
    r["K"] = *kc.K;
    r["risk_K"] = risk_after_K(det.risk, *kc.K);
  } else if (kc.target) {
    if (det.risk >= 1.0) throw Infeasible("pair: risk is 1, no K reaches the target risk");
    double k = std::ceil(std::log(*kc.target) / std::log(det.risk) - 1e-12);
    if (!(k < 1e9)) throw Infeasible("pair: required K exceeds 1e9");
    int K = std::max(1, static_cast<int>(k));
    r["K"] = K;
    r["risk_K"] = risk_after_K(det.risk, K);
  }
  if (mc) {
    long n = mc_trials(*mc, "pair.mc", 100000);
    Vec t1 = truth[0] ? *truth[0] : s.mu1_star;
    Vec t2 = truth[1] ? *truth[1] : s.mu2_star;
    c.add_mc("risk side 1", mc_detector_risk(det, *family_sampler(f1, t1, "pair.mc"), 1, n, c.mc_options()));
    c.add_mc("risk side 2", mc_detector_risk(det, *family_sampler(f2, t2, "pair.mc"), 2, n, c.mc_options()));
    if (r.contains("K")) {
      int K = r["K"].get<int>();
      PairTestReport e = mc_test_error(det, *family_sampler(f1, t1, "pair.mc"), *family_sampler(f2, t2, "pair.mc"),
                                       K, std::min(n, 100000L), c.mc_options());
      c.add_mc("test error H1", e.h1);
      c.add_mc("test error H2", e.h2);
    }
  }
  c.out.report["results"] = r;
}

// ---- multitest / color

struct BatteryTask {
  ClosenessRelation C{1};
  std::vector<std::vector<int>> partition;
  KChoice k;
  std::optional<Mat> observations;
  const json* mc = nullptr;
  std::vector<SamplerPtr> samplers;
};

BatteryTask parse_battery_task(Context& c, const std::string& name, bool color) {
  const json& b = c.block(name);
  if (color)
    allow_keys(b, name, {"partition", "K", "target_risk", "observations", "mc"});
  else
    allow_keys(b, name, {"closeness", "K", "target_risk", "observations", "mc"});
  BatteryTask t;
  const int J = static_cast<int>(c.families.size());
  if (J < 2) throw ConfigError("families", "needs at least two families");
  for (const Family& f : c.families)
    if (f.dim != c.families[0].dim) throw ConfigError("families", "families have different observation dimensions");
  t.C = ClosenessRelation(J);
  if (color) {
    const json& p = field(b, "partition", name);
    if (!p.is_array() || p.empty()) throw ConfigError(sub(name, "partition"), "expected a list of blocks");
    for (std::size_t q = 0; q < p.size(); ++q) {
      const json& blk = p[q];
      if (!blk.is_array() || blk.empty()) throw ConfigError(idx(sub(name, "partition"), q), "expected a nonempty list");
      std::vector<int> v;
      for (std::size_t r = 0; r < blk.size(); ++r)
        v.push_back(static_cast<int>(get_integer(blk[r], idx(idx(sub(name, "partition"), q), r), 0, J - 1)));
      t.partition.push_back(v);
    }
    try {
      t.C = ClosenessRelation::from_partition(J, t.partition);
    } catch (const InvalidArgument& e) {
      throw ConfigError(sub(name, "partition"), e.what());
    }
  } else if (const json* cl = optional_field(b, "closeness")) {
    if (!cl->is_array()) throw ConfigError(sub(name, "closeness"), "expected a list of index pairs");
    for (std::size_t q = 0; q < cl->size(); ++q) {
      const std::string pp = idx(sub(name, "closeness"), q);
      if (!(*cl)[q].is_array() || (*cl)[q].size() != 2) throw ConfigError(pp, "expected an index pair");
      t.C.set_close(static_cast<int>(get_integer((*cl)[q][0], pp + "[0]", 0, J - 1)),
                    static_cast<int>(get_integer((*cl)[q][1], pp + "[1]", 0, J - 1)));
    }
  }
  t.k = parse_k(b, name, true);
  if (const json* o = optional_field(b, "observations"))
    t.observations = get_observations(*o, sub(name, "observations"), c.families[0].dim);
  t.mc = optional_field(b, "mc");
  if (t.mc) {
    allow_keys(*t.mc, sub(name, "mc"), {"trials", "truth"});
    const json& tr = field(*t.mc, "truth", sub(name, "mc"));
    if (!tr.is_array() || static_cast<int>(tr.size()) != J)
      throw ConfigError(sub(name, "mc.truth"), "expected one parameter vector per family");
    for (int j = 0; j < J; ++j) {
      std::string pp = idx(sub(name, "mc.truth"), static_cast<std::size_t>(j));
      Vec mu = get_vector(tr[static_cast<std::size_t>(j)], pp, c.families[j].data.param_dim());
      t.samplers.push_back(family_sampler(c.families[j], mu, pp));
    }
  }
  return t;
}

void battery_results(Context& c, const ShiftedBattery& sb, json& r) {
  const PairwiseBattery& b = sb.battery;
  json pairs = json::array();
  for (int i = 0; i < b.J; ++i)
    for (int j = i + 1; j < b.J; ++j)
      if (!b.C.close(i, j)) {
        json d = detector_json(b.at(i, j));
        d["i"] = i;
        d["j"] = j;
        pairs.push_back(d);
      }
  Mat E = e_matrix(b, sb.K);
  double resid = 0.0;
  for (int i = 0; i < b.J; ++i) {
    if (E.row(i).cwiseAbs().maxCoeff() == 0.0) continue;
    double s = 0.0;
    for (int j = 0; j < b.J; ++j) s += E(i, j) * std::exp(-sb.alpha(i, j));
    resid = std::max(resid, std::abs(s - sb.eps_hat));
  }
  r["detectors"] = pairs;
  r["pair_risks"] = to_json(b.eps);
  r["K"] = sb.K;
  r["E"] = to_json(E);
  r["alpha"] = to_json(sb.alpha);
  r["eps_hat"] = sb.eps_hat;
  r["row_equalization_residual"] = resid;
  r["vacuous"] = sb.vacuous();
  if (sb.vacuous()) c.warn("eps_hat >= 1: the multi-test carries no guarantee");
}

ShiftedBattery solve_battery(Context& c, const BatteryTask& t) {
  std::vector<RegularData> datas;
  for (const Family& f : c.families) datas.push_back(f.data);
  PairwiseBattery b = build_battery(datas, t.C, c.saddle, c.opt.threads);
  int K = t.k.K ? *t.k.K : min_k_for_risk(b, *t.k.target);
  return shift_battery(std::move(b), K);
}

void cmd_multitest(Context& c) {
  BatteryTask t = parse_battery_task(c, "multitest", false);
  if (c.opt.validate_only) return;
  ShiftedBattery sb = solve_battery(c, t);
  json r;
  battery_results(c, sb, r);
  if (t.observations) {
    if (t.observations->cols() != sb.K)
      throw ConfigError("multitest.observations", "expected K = " + std::to_string(sb.K) + " observations");
    r["accepted"] = run_multitest(sb, *t.observations);
  }
  if (t.mc) {
    long n = mc_trials(*t.mc, "multitest.mc", 10000);
    std::vector<McReport> e = mc_test_error(sb, t.samplers, n, c.mc_options());
    for (std::size_t j = 0; j < e.size(); ++j) c.add_mc("C-risk under H" + std::to_string(j), e[j]);
  }
  c.out.report["results"] = r;
}

void cmd_color(Context& c) {
  BatteryTask t = parse_battery_task(c, "color", true);
  if (c.opt.validate_only) return;
  ShiftedBattery sb = solve_battery(c, t);
  json r;
  battery_results(c, sb, r);
  if (t.observations) {
    if (t.observations->cols() != sb.K)
      throw ConfigError("color.observations", "expected K = " + std::to_string(sb.K) + " observations");
    std::optional<int> col = infer_color(t.partition, sb, *t.observations);
    r["color"] = col ? json(*col) : json("undecided");
  }
  if (t.mc) {
    long n = mc_trials(*t.mc, "color.mc", 10000);
    std::vector<McReport> e = mc_test_error(sb, t.samplers, n, c.mc_options());
    for (std::size_t j = 0; j < e.size(); ++j) c.add_mc("C-risk under H" + std::to_string(j), e[j]);
    std::vector<McReport> w = mc_color_error(t.partition, sb, t.samplers, n, c.mc_options());
    for (std::size_t j = 0; j < w.size(); ++j) c.add_mc("wrong colour under H" + std::to_string(j), w[j]);
  }
  c.out.report["results"] = r;
}

// ---- aggregate

void cmd_aggregate(Context& c) {
  const std::string P = "aggregate";
  const json& b = c.block(P);
  allow_keys(b, P, {"mode", "K", "eps", "estimates", "G", "theta", "deltas", "observations", "mc"});
  const json& mode_j = optional_field(b, "mode") ? b["mode"] : json("generic");
  if (!mode_j.is_string() || (mode_j != "generic" && mode_j != "fast_path"))
    throw ConfigError(sub(P, "mode"), "expected generic or fast_path");
  const bool fast = mode_j == "fast_path";
  const int K = static_cast<int>(get_integer(field(b, "K", P), sub(P, "K"), 1, 1000000000));
  const double eps = get_number(field(b, "eps", P), sub(P, "eps"));
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError(sub(P, "eps"), "must lie in (0, 1)");
  const json& ej = field(b, "estimates", P);
  if (!ej.is_array() || ej.size() < 2) throw ConfigError(sub(P, "estimates"), "expected at least two estimates");
  std::vector<Vec> est;
  for (std::size_t l = 0; l < ej.size(); ++l)
    est.push_back(get_vector(ej[l], idx(sub(P, "estimates"), l), l ? est[0].size() : -1));
  const Eigen::Index m = est[0].size();
  const json* obs_j = optional_field(b, "observations");
  const json* mc = optional_field(b, "mc");
  if (mc) allow_keys(*mc, sub(P, "mc"), {"trials", "truth"});
  json r;

  if (fast) {
    Mat theta = get_psd_matrix(field(b, "theta", P), sub(P, "theta"), m);
    if (min_eigenvalue(theta) <= 0.0) throw ConfigError(sub(P, "theta"), "must be positive definite");
    std::optional<Mat> obs;
    if (obs_j) obs = get_observations(*obs_j, sub(P, "observations"), m);
    Vec truth;
    if (mc) truth = get_vector(field(*mc, "truth", sub(P, "mc")), sub(P, "mc.truth"), m);
    if (c.opt.validate_only) return;
    std::vector<double> deltas;
    try {
      deltas = fast_path_deltas(theta, est, K, eps);
    } catch (const InvalidArgument& e) {
      throw ConfigError(P, e.what());
    }
    r["mode"] = "fast_path";
    r["deltas"] = deltas;
    if (obs) {
      AggregationResult a = subgaussian_fast_path(theta, est, K, eps, *obs);
      r["index"] = a.index;
      r["red"] = std::vector<int>(a.red.begin(), a.red.end());
    }
    if (mc) {
      long n = mc_trials(*mc, sub(P, "mc"), 1000);
      c.add_mc("oracle inequality violations",
               mc_aggregation_fast_path(theta, est, K, eps, truth, *gaussian_sampler(truth, theta), n, c.mc_options()));
    }
    c.out.report["results"] = r;
    return;
  }

  if (c.families.empty()) throw ConfigError("families", "generic aggregation needs at least one family");
  AggregationProblem p;
  for (const Family& f : c.families) p.datas.push_back(f.data);
  const Eigen::Index n = c.families[0].data.param_dim();
  for (std::size_t i = 0; i < c.families.size(); ++i)
    if (c.families[i].data.param_dim() != n || c.families[i].dim != c.families[0].dim)
      throw ConfigError(idx("families", i), "aggregation families must share observation and parameter spaces");
  p.G = get_matrix(field(b, "G", P), sub(P, "G"), m, n);
  p.estimates = est;
  p.K = K;
  p.eps = eps;
  p.saddle = c.saddle;
  p.threads = c.opt.threads;
  std::optional<std::vector<double>> deltas;
  if (const json* d = optional_field(b, "deltas")) {
    Vec v = get_vector(*d, sub(P, "deltas"), static_cast<Eigen::Index>(est.size()));
    if (v.minCoeff() < 0.0) throw ConfigError(sub(P, "deltas"), "must be nonnegative");
    deltas = std::vector<double>(v.data(), v.data() + v.size());
  }
  std::optional<Mat> obs;
  if (obs_j) obs = get_observations(*obs_j, sub(P, "observations"), c.families[0].dim);
  if (obs && obs->cols() != K) throw ConfigError(sub(P, "observations"), "expected K observations");
  Vec truth;
  SamplerPtr truth_sampler;
  if (mc) {
    truth = get_vector(field(*mc, "truth", sub(P, "mc")), sub(P, "mc.truth"), n);
    for (const Family& f : c.families)
      if (f.data.M().contains(truth, 1e-9)) {
        truth_sampler = family_sampler(f, truth, sub(P, "mc.truth"));
        break;
      }
    if (!truth_sampler) throw ConfigError(sub(P, "mc.truth"), "lies in none of the families' parameter sets");
  }
  if (c.opt.validate_only) return;
  Aggregator agg = build_aggregator(p, deltas);
  r["mode"] = "generic";
  r["deltas"] = agg.deltas;
  json procs = json::array();
  for (const IndividualInference& ii : agg.procedures)
    procs.push_back({{"delta", ii.delta}, {"risk", ii.risk}, {"red_sets", ii.n_red}, {"blue_sets", ii.n_blue}});
  r["procedures"] = procs;
  if (obs) {
    AggregationResult a = aggregate(agg, *obs);
    r["index"] = a.index;
    r["red"] = std::vector<int>(a.red.begin(), a.red.end());
  }
  if (mc) {
    long trials = mc_trials(*mc, sub(P, "mc"), 1000);
    c.add_mc("oracle inequality violations", mc_aggregation(agg, truth, *truth_sampler, trials, c.mc_options()));
  }
  c.out.report["results"] = r;
}

// ---- quadlift

QuadLiftSpec parse_lift(const json& j, const std::string& path, double gamma) {
  allow_keys(j, path, {"A", "U", "covariance", "theta_star"});
  QuadLiftSpec s;
  s.A = get_matrix(field(j, "A", path), sub(path, "A"));
  const Eigen::Index d = s.A.rows(), m = s.A.cols() - 1;
  if (m < 1) throw ConfigError(sub(path, "A"), "needs at least two columns (A [u; 1])");
  s.U = parse_set(field(j, "U", path), sub(path, "U"), m);
  s.Ucov = parse_covariance_set(field(j, "covariance", path), sub(path, "covariance"), d);
  if (const json* t = optional_field(j, "theta_star")) {
    s.theta_star = get_psd_matrix(*t, sub(path, "theta_star"), d);
  } else if (s.Ucov->is_singleton()) {
    s.theta_star = unvec(s.Ucov->project(Vec::Zero(d * d)), d);
  } else {
    throw ConfigError(sub(path, "theta_star"), "required when the covariance set is not a singleton");
  }
  if (min_eigenvalue(s.theta_star) <= 0.0) throw ConfigError(sub(path, "theta_star"), "must be positive definite");
  s.gamma = gamma;
  return s;
}

QuadDetector solve_quad(const QuadLiftSpec& a, const QuadLiftSpec& b, const QuadSolveOptions& o) {
  try {
    return solve_quad_detector(a, b, o);
  } catch (const InvalidArgument& e) {
    throw ConfigError("quadlift", e.what());
  } catch (const DomainError& e) {
    throw ConfigError("quadlift", e.what());
  }
}

void cmd_quadlift(Context& c) {
  const std::string P = "quadlift";
  const json& b = c.block(P);
  allow_keys(b, P, {"gamma", "mode", "compare_affine", "hypotheses", "mc"});
  double gamma = 0.99;
  if (const json* g = optional_field(b, "gamma")) gamma = get_number(*g, sub(P, "gamma"));
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError(sub(P, "gamma"), "must lie in (0, 1)");
  QuadSolveOptions qo = c.quad;
  if (const json* md = optional_field(b, "mode")) {
    if (*md == "full") qo.mode = QuadMode::full;
    else if (*md == "affine_only") qo.mode = QuadMode::affine_only;
    else if (*md == "pure_quadratic") qo.mode = QuadMode::pure_quadratic;
    else throw ConfigError(sub(P, "mode"), "expected full, affine_only or pure_quadratic");
  }
  bool compare = true;
  if (const json* ca = optional_field(b, "compare_affine")) {
    if (!ca->is_boolean()) throw ConfigError(sub(P, "compare_affine"), "expected a boolean");
    compare = ca->get<bool>();
  }
  const json& hyp = field(b, "hypotheses", P);
  if (!hyp.is_array() || hyp.size() != 2) throw ConfigError(sub(P, "hypotheses"), "expected two hypotheses");
  QuadLiftSpec s1 = parse_lift(hyp[0], sub(P, "hypotheses[0]"), gamma);
  QuadLiftSpec s2 = parse_lift(hyp[1], sub(P, "hypotheses[1]"), gamma);
  if (s1.A.rows() != s2.A.rows()) throw ConfigError(sub(P, "hypotheses"), "observation dimensions differ");
  const json* mc = optional_field(b, "mc");
  std::vector<SamplerPtr> samp;
  if (mc) {
    allow_keys(*mc, sub(P, "mc"), {"trials", "truth"});
    const json& tr = field(*mc, "truth", sub(P, "mc"));
    if (!tr.is_array() || tr.size() != 2) throw ConfigError(sub(P, "mc.truth"), "expected two entries");
    for (std::size_t k = 0; k < 2; ++k) {
      const QuadLiftSpec& s = k ? s2 : s1;
      std::string pp = idx(sub(P, "mc.truth"), k);
      allow_keys(tr[k], pp, {"u", "covariance"});
      Vec u = get_vector(field(tr[k], "u", pp), sub(pp, "u"), s.A.cols() - 1);
      if (!s.U->contains(u, 1e-9)) throw ConfigError(sub(pp, "u"), "lies outside U");
      Mat cov = s.theta_star;
      if (const json* cj = optional_field(tr[k], "covariance")) cov = get_psd_matrix(*cj, sub(pp, "covariance"), s.A.rows());
      if (!s.Ucov->contains(vec(cov), 1e-9)) throw ConfigError(sub(pp, "covariance"), "lies outside the covariance set");
      Vec u1(u.size() + 1);
      u1 << u, 1.0;
      samp.push_back(gaussian_sampler(s.A * u1, cov));
    }
  }
  if (c.opt.validate_only) return;
  QuadDetector q = solve_quad(s1, s2, qo);
  json r;
  r["mode"] = to_string(qo.mode);
  r["detector"] = {{"h", to_json(q.h)},       {"H", to_json(q.H)},
                   {"a", q.a},                {"risk", q.risk},
                   {"gap", q.gap},            {"stationarity", q.stationarity},
                   {"iterations", q.iterations}, {"converged", q.converged}};
  if (compare) {
    AffineDetector a = special_case_affine(s1, s2, c.saddle);
    r["affine"] = detector_json(a);
  }
  if (q.risk >= 1.0 - 1e-9) c.warn("hypotheses indistinguishable by the quadratic detector (risk 1)");
  if (mc) {
    long n = mc_trials(*mc, sub(P, "mc"), 100000);
    c.add_mc("risk side 1", mc_detector_risk(q, *samp[0], 1, n, c.mc_options()));
    c.add_mc("risk side 2", mc_detector_risk(q, *samp[1], 2, n, c.mc_options()));
  }
  c.out.report["results"] = r;
}

// ---- simulate

void cmd_simulate(Context& c) {
  const std::string P = "simulate";
  const json& b = c.block(P);
  allow_keys(b, P, {"detector", "runs", "test_error"});
  std::optional<AffineDetector> aff;
  std::optional<QuadDetector> quad;
  if (const json* d = optional_field(b, "detector")) {
    allow_keys(*d, sub(P, "detector"), {"h", "H", "a", "risk"});
    AffineDetector a;
    a.h = get_vector(field(*d, "h", sub(P, "detector")), sub(P, "detector.h"));
    if (const json* x = optional_field(*d, "a")) a.a = get_number(*x, sub(P, "detector.a"));
    a.risk = get_number(field(*d, "risk", sub(P, "detector")), sub(P, "detector.risk"));
    if (const json* hm = optional_field(*d, "H")) {
      QuadDetector q;
      q.h = a.h;
      q.H = get_matrix(*hm, sub(P, "detector.H"), a.h.size(), a.h.size());
      q.a = a.a;
      q.risk = a.risk;
      quad = q;
    } else {
      aff = a;
    }
  } else if (c.families.size() < 2) {
    throw ConfigError(sub(P, "detector"), "required unless at least two families are given");
  }
  const json& runs = field(b, "runs", P);
  if (!runs.is_array() || runs.empty()) throw ConfigError(sub(P, "runs"), "expected a nonempty list");
  struct Run {
    std::string name;
    SamplerPtr s;
    int side;
    long n;
  };
  std::vector<Run> rs;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::string pp = idx(sub(P, "runs"), k);
    allow_keys(runs[k], pp, {"name", "sampler", "side", "n"});
    Run r;
    r.s = parse_sampler(field(runs[k], "sampler", pp), sub(pp, "sampler"));
    r.side = static_cast<int>(get_integer(field(runs[k], "side", pp), sub(pp, "side"), 1, 2));
    r.n = 100000;
    if (const json* n = optional_field(runs[k], "n")) r.n = get_integer(*n, sub(pp, "n"), 1000, 100000000);
    r.name = "run " + std::to_string(k) + " side " + std::to_string(r.side);
    if (const json* nm = optional_field(runs[k], "name")) {
      if (!nm->is_string()) throw ConfigError(sub(pp, "name"), "expected a string");
      r.name = nm->get<std::string>();
    }
    rs.push_back(r);
  }
  const json* te = optional_field(b, "test_error");
  int teK = 1;
  long teN = 10000;
  SamplerPtr te1, te2;
  if (te) {
    if (quad) throw ConfigError(sub(P, "test_error"), "needs an affine detector");
    allow_keys(*te, sub(P, "test_error"), {"K", "trials", "samplers"});
    teK = static_cast<int>(get_integer(field(*te, "K", sub(P, "test_error")), sub(P, "test_error.K"), 1, 1000000));
    if (const json* n = optional_field(*te, "trials")) teN = get_integer(*n, sub(P, "test_error.trials"), 1000, 100000000);
    const json& ss = field(*te, "samplers", sub(P, "test_error"));
    if (!ss.is_array() || ss.size() != 2) throw ConfigError(sub(P, "test_error.samplers"), "expected two samplers");
    te1 = parse_sampler(ss[0], sub(P, "test_error.samplers[0]"));
    te2 = parse_sampler(ss[1], sub(P, "test_error.samplers[1]"));
  }
  if (c.opt.validate_only) return;

  json r;
  if (!aff && !quad) {
    SaddleProblem p(c.families[0].data, c.families[1].data, c.saddle);
    aff = build_detector(solve_saddle(p), p);
  }
  if (aff) {
    r["detector"] = detector_json(*aff);
  } else {
    r["detector"] = {{"h", to_json(quad->h)}, {"H", to_json(quad->H)}, {"a", quad->a}, {"risk", quad->risk}};
  }
  const Eigen::Index d = aff ? aff->h.size() : quad->h.size();
  for (std::size_t k = 0; k < rs.size(); ++k)
    if (rs[k].s->dim() != d)
      throw ConfigError(idx(sub(P, "runs"), k) + ".sampler", "dimension differs from the detector's");
  for (const Run& run : rs)
    c.add_mc(run.name, aff ? mc_detector_risk(*aff, *run.s, run.side, run.n, c.mc_options())
                           : mc_detector_risk(*quad, *run.s, run.side, run.n, c.mc_options()));
  if (te) {
    if (te1->dim() != d || te2->dim() != d)
      throw ConfigError(sub(P, "test_error.samplers"), "dimension differs from the detector's");
    PairTestReport e = mc_test_error(*aff, *te1, *te2, teK, teN, c.mc_options());
    c.add_mc("test error H1", e.h1);
    c.add_mc("test error H2", e.h2);
  }
  c.out.report["results"] = r;
}

}  // namespace

std::string RunReport::json_text() const { return report.dump(2) + "\n"; }

std::string RunReport::csv() const {
  std::ostringstream os;
  os << "name,estimate,std_error,n,bound,pass\n";
  for (const McRow& m : mc) {
    os << '"' << m.name << "\"," << fmt(m.report.estimate) << ',' << fmt(m.report.std_error) << ',' << m.report.n
       << ',' << (m.report.bound ? fmt(*m.report.bound) : std::string()) << ',' << (m.report.pass ? "true" : "false")
       << '\n';
  }
  return os.str();
}

namespace {

void flatten(const json& j, const std::string& path, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(*it, path.empty() ? it.key() : path + "." + it.key(), rows);
    return;
  }
  if (j.is_array()) {
    bool scalars = true;
    for (const json& e : j) scalars = scalars && e.is_primitive();
    if (scalars && j.size() <= 8) {
      std::string s = "[";
      for (std::size_t i = 0; i < j.size(); ++i) s += (i ? " " : "") + (j[i].is_number_float() ? fmt(j[i].get<double>()) : j[i].dump());
      rows.emplace_back(path, s + "]");
    } else if (scalars) {
      rows.emplace_back(path, "[" + std::to_string(j.size()) + " values]");
    } else {
      for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", rows);
    }
    return;
  }
  rows.emplace_back(path, j.is_number_float() ? fmt(j.get<double>()) : j.dump());
}

}  // namespace

std::string RunReport::text(double seconds) const {
  std::ostringstream os;
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("task", report.value("task", ""));
  if (report.contains("results")) flatten(report["results"], "", rows);
  std::size_t w = 0;
  for (auto& r : rows) w = std::max(w, r.first.size());
  for (auto& r : rows) os << r.first << std::string(w - r.first.size() + 2, ' ') << r.second << '\n';
  if (!mc.empty()) {
    std::size_t nw = 4;
    for (const McRow& m : mc) nw = std::max(nw, m.name.size());
    char buf[256];
    os << '\n';
    std::snprintf(buf, sizeof buf, "%-*s  %14s  %12s  %10s  %14s  %s\n", int(nw), "name", "estimate", "std_error", "n",
                  "bound", "pass");
    os << buf;
    for (const McRow& m : mc) {
      std::snprintf(buf, sizeof buf, "%-*s  %14.8g  %12.4g  %10ld  %14s  %s\n", int(nw), m.name.c_str(),
                    m.report.estimate, m.report.std_error, m.report.n,
                    m.report.bound ? fmt(*m.report.bound).substr(0, 14).c_str() : "-", m.report.pass ? "yes" : "NO");
      os << buf;
    }
  }
  for (const std::string& wn : warnings) os << "warning: " << wn << '\n';
  char tb[64];
  std::snprintf(tb, sizeof tb, "wall time %.3f s\n", seconds);
  os << tb;
  return os.str();
}

RunReport run(const json& cfg_in, const RunOptions& opt) {
  check_top_level(cfg_in);
  Context c;
  c.cfg = cfg_in;
  c.opt = opt;
  if (opt.threads < 0) throw ConfigError("threads", "must be nonnegative");
  if (const json* s = optional_field(cfg_in, "seed")) c.seed = s->get<std::uint64_t>();
  if (opt.seed) c.seed = *opt.seed;
  c.cfg["seed"] = c.seed;
  parse_solver(c);
  if (opt.tol) c.cfg["solver"]["tol"] = *opt.tol;
  c.saddle.seed = c.seed;
  c.families = parse_families(c.cfg);

  const std::string task = c.cfg["task"].get<std::string>();
  c.out.report = {{"schema_version", kSchemaVersion}, {"task", task}, {"inputs", c.cfg}};
  if (task == "pair") cmd_pair(c);
  else if (task == "multitest") cmd_multitest(c);
  else if (task == "color") cmd_color(c);
  else if (task == "aggregate") cmd_aggregate(c);
  else if (task == "quadlift") cmd_quadlift(c);
  else cmd_simulate(c);

  if (opt.validate_only) {
    c.out.report["results"] = {{"valid", true}};
    return c.out;
  }
  json mc = json::array();
  for (const McRow& m : c.out.mc) mc.push_back(to_json(m.report, m.name));
  c.out.report["mc"] = mc;
  c.out.report["warnings"] = c.out.warnings;
  return c.out;
}

}  // namespace dforge::cli
