#include "config.hpp"

#include <cmath>
#include <set>

#include "dforge/convex_set.hpp"
#include "dforge/errors.hpp"
#include "dforge/linalg.hpp"

namespace dforge::cli {

namespace {

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }
std::string key(const std::string& path, const std::string& k) { return path.empty() ? k : path + "." + k; }

// Library constructors validate too; re-badge their complaints with the path.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  } catch (const InvalidParameter& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

const json& field(const json& obj, const std::string& k, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(k);
  if (it == obj.end()) throw ConfigError(key(path, k), "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& k) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(k);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "(root)" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(key(path, it.key()), "unknown field");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

long get_integer(const json& j, const std::string& path, long lo, long hi) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  long v = j.get<long>();
  if (v < lo || v > hi)
    throw ConfigError(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

Vec get_vector(const json& j, const std::string& path, Eigen::Index dim) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  if (dim >= 0 && static_cast<Eigen::Index>(j.size()) != dim)
    throw ConfigError(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = get_number(j[i], idx(path, i));
  return v;
}

Mat get_matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty list of rows");
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (rows >= 0 && r != rows)
    throw ConfigError(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
  Vec first = get_vector(j[0], idx(path, 0), cols);
  Mat m(r, first.size());
  m.row(0) = first.transpose();
  for (Eigen::Index i = 1; i < r; ++i)
    m.row(i) = get_vector(j[static_cast<std::size_t>(i)], idx(path, i), first.size()).transpose();
  return m;
}

Mat get_psd_matrix(const json& j, const std::string& path, Eigen::Index d) {
  Mat m = get_matrix(j, path, d, d);
  if (m.rows() != m.cols()) throw ConfigError(path, "matrix must be square");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw ConfigError(path, "matrix is not symmetric");
  m = sym(m);
  if (min_eigenvalue(m) < -1e-12 * scale) throw ConfigError(path, "matrix is not positive semidefinite");
  return m;
}

Mat get_observations(const json& j, const std::string& path, Eigen::Index d) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty list of observations");
  Mat out(d, static_cast<Eigen::Index>(j.size()));
  for (std::size_t t = 0; t < j.size(); ++t)
    out.col(static_cast<Eigen::Index>(t)) = get_vector(j[t], idx(path, t), d);
  return out;
}

SetPtr parse_set(const json& j, const std::string& path, Eigen::Index dim) {
  const json& type = field(j, "type", path);
  if (!type.is_string()) throw ConfigError(key(path, "type"), "expected a string");
  const std::string t = type.get<std::string>();
  SetPtr out;
  if (t == "singleton") {
    allow_keys(j, path, {"type", "point"});
    out = singleton(get_vector(field(j, "point", path), key(path, "point"), dim));
  } else if (t == "box") {
    allow_keys(j, path, {"type", "lo", "hi"});
    Vec lo = get_vector(field(j, "lo", path), key(path, "lo"), dim);
    Vec hi = get_vector(field(j, "hi", path), key(path, "hi"), lo.size());
    out = at_path(path, [&] { return box(lo, hi); });
  } else if (t == "ball") {
    allow_keys(j, path, {"type", "center", "radius"});
    Vec c = get_vector(field(j, "center", path), key(path, "center"), dim);
    double r = get_number(field(j, "radius", path), key(path, "radius"));
    if (!(r >= 0.0)) throw ConfigError(key(path, "radius"), "must be nonnegative");
    out = ball(c, r);
  } else if (t == "simplex") {
    allow_keys(j, path, {"type", "dim", "total", "lo", "hi"});
    long n = get_integer(field(j, "dim", path), key(path, "dim"), 1, 1 << 20);
    if (dim >= 0 && n != dim) throw ConfigError(key(path, "dim"), "expected " + std::to_string(dim));
    double total = 1.0;
    if (const json* s = optional_field(j, "total")) total = get_number(*s, key(path, "total"));
    Vec lo = Vec::Zero(n), hi = Vec::Constant(n, total);
    if (const json* s = optional_field(j, "lo")) lo = get_vector(*s, key(path, "lo"), n);
    if (const json* s = optional_field(j, "hi")) hi = get_vector(*s, key(path, "hi"), n);
    out = at_path(path, [&] { return std::make_shared<Simplex>(lo, hi, total); });
  } else if (t == "halfspaces") {
    allow_keys(j, path, {"type", "base", "A", "b"});
    SetPtr base = parse_set(field(j, "base", path), key(path, "base"), dim);
    Mat a = get_matrix(field(j, "A", path), key(path, "A"), -1, base->dim());
    Vec b = get_vector(field(j, "b", path), key(path, "b"), a.rows());
    out = at_path(path, [&] { return std::make_shared<HalfSpaceIntersection>(base, a, b); });
  } else if (t == "psd_interval") {
    allow_keys(j, path, {"type", "lower", "upper"});
    std::optional<Mat> lo, hi;
    Eigen::Index d = -1;
    if (dim >= 0) {
      d = static_cast<Eigen::Index>(std::lround(std::sqrt(double(dim))));
      if (d * d != dim) throw ConfigError(path, "psd_interval needs a square dimension, got " + std::to_string(dim));
    }
    if (const json* s = optional_field(j, "lower")) lo = get_psd_matrix(*s, key(path, "lower"), d);
    if (const json* s = optional_field(j, "upper")) hi = get_psd_matrix(*s, key(path, "upper"), lo ? lo->rows() : d);
    if (!lo && !hi) throw ConfigError(path, "psd_interval needs lower or upper");
    out = at_path(path, [&] { return std::make_shared<PsdInterval>(lo, hi); });
  } else {
    throw ConfigError(key(path, "type"),
                      "unknown set type '" + t + "' (singleton, box, ball, simplex, halfspaces, psd_interval)");
  }
  if (dim >= 0 && out->dim() != dim)
    throw ConfigError(path, "set has dimension " + std::to_string(out->dim()) + ", expected " + std::to_string(dim));
  return out;
}

SetPtr parse_covariance_set(const json& j, const std::string& path, Eigen::Index d) {
  const json& type = field(j, "type", path);
  if (type == "singleton") {
    allow_keys(j, path, {"type", optional_field(j, "matrix") ? "matrix" : "point"});
    if (const json* m = optional_field(j, "matrix")) return singleton(vec(get_psd_matrix(*m, key(path, "matrix"), d)));
    Vec p = get_vector(field(j, "point", path), key(path, "point"), d * d);
    Mat m = unvec(p, d);
    json rows = json::array();
    for (Eigen::Index i = 0; i < d; ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return singleton(vec(get_psd_matrix(rows, key(path, "point"), d)));
  }
  if (type == "psd_interval") return parse_set(j, path, d * d);
  throw ConfigError(key(path, "type"), "covariance sets are singleton (matrix) or psd_interval");
}

Family parse_family(const json& j, const std::string& path) {
  const json& kind = field(j, "kind", path);
  if (!kind.is_string()) throw ConfigError(key(path, "kind"), "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "gaussian") {
    allow_keys(j, path, {"kind", "mean", "covariance"});
    SetPtr means = parse_set(field(j, "mean", path), key(path, "mean"));
    const Eigen::Index d = means->dim();
    SetPtr cov = parse_covariance_set(field(j, "covariance", path), key(path, "covariance"), d);
    return {Kind::gaussian, d, at_path(path, [&] { return sub_gaussian_family(means, cov); })};
  }
  if (k == "poisson") {
    allow_keys(j, path, {"kind", "intensity"});
    SetPtr m = parse_set(field(j, "intensity", path), key(path, "intensity"));
    return {Kind::poisson, m->dim(), at_path(key(path, "intensity"), [&] { return poisson_family(m); })};
  }
  if (k == "discrete") {
    allow_keys(j, path, {"kind", "probabilities"});
    SetPtr m = parse_set(field(j, "probabilities", path), key(path, "probabilities"));
    return {Kind::discrete, m->dim(), at_path(key(path, "probabilities"), [&] { return discrete_family(m); })};
  }
  throw ConfigError(key(path, "kind"), "unknown family kind '" + k + "' (gaussian, poisson, discrete)");
}

std::vector<Family> parse_families(const json& cfg) {
  const json* fs = optional_field(cfg, "families");
  std::vector<Family> out;
  if (!fs) return out;
  if (!fs->is_array()) throw ConfigError("families", "expected an array");
  for (std::size_t i = 0; i < fs->size(); ++i) out.push_back(parse_family((*fs)[i], idx("families", i)));
  return out;
}

SamplerPtr family_sampler(const Family& f, const Vec& mu, const std::string& path) {
  if (mu.size() != f.data.param_dim())
    throw ConfigError(path, "parameter has " + std::to_string(mu.size()) + " entries, family expects " +
                                std::to_string(f.data.param_dim()));
  if (!f.data.M().contains(mu, 1e-9)) throw ConfigError(path, "parameter lies outside the family's set");
  return at_path(path, [&]() -> SamplerPtr {
    switch (f.kind) {
      case Kind::gaussian:
        return gaussian_sampler(mu.head(f.dim), unvec(mu, f.dim, f.dim));
      case Kind::poisson:
        return poisson_sampler(mu);
      case Kind::discrete:
        return discrete_sampler(mu);
    }
    throw ConfigError(path, "unknown family kind");
  });
}

SamplerPtr parse_sampler(const json& j, const std::string& path) {
  const json& kind = field(j, "kind", path);
  if (!kind.is_string()) throw ConfigError(key(path, "kind"), "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "gaussian") {
    allow_keys(j, path, {"kind", "mean", "covariance"});
    Vec m = get_vector(field(j, "mean", path), key(path, "mean"));
    Mat c = get_psd_matrix(field(j, "covariance", path), key(path, "covariance"), m.size());
    return at_path(path, [&] { return gaussian_sampler(m, c); });
  }
  if (k == "poisson") {
    allow_keys(j, path, {"kind", "intensity"});
    Vec m = get_vector(field(j, "intensity", path), key(path, "intensity"));
    return at_path(key(path, "intensity"), [&] { return poisson_sampler(m); });
  }
  if (k == "discrete") {
    allow_keys(j, path, {"kind", "probabilities"});
    Vec p = get_vector(field(j, "probabilities", path), key(path, "probabilities"));
    return at_path(key(path, "probabilities"), [&] { return discrete_sampler(p); });
  }
  throw ConfigError(key(path, "kind"), "unknown sampler kind '" + k + "' (gaussian, poisson, discrete)");
}

void check_top_level(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("(root)", "expected an object");
  const json& v = field(cfg, "schema_version", "");
  if (!v.is_string() || v.get<std::string>() != kSchemaVersion)
    throw ConfigError("schema_version", std::string("expected \"") + kSchemaVersion + "\"");
  const json& t = field(cfg, "task", "");
  static const std::set<std::string> tasks{"pair", "multitest", "color", "aggregate", "quadlift", "simulate"};
  if (!t.is_string() || !tasks.count(t.get<std::string>()))
    throw ConfigError("task", "expected one of pair, multitest, color, aggregate, quadlift, simulate");
  if (const json* s = optional_field(cfg, "seed"))
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
      throw ConfigError("seed", "expected a nonnegative integer");
  allow_keys(cfg, "", {"schema_version", "task", "seed", "solver", "families", "pair", "multitest", "color",
                       "aggregate", "quadlift", "simulate", "description"});
}

}  // namespace dforge::cli
