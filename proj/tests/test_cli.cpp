#include <cmath>
#include <fstream>

#include "cli/commands.hpp"
#include "dforge/errors.hpp"
#include "test_util.hpp"

using namespace dforge;
using namespace dforge::cli;

namespace {

json load(const std::string& name) {
  std::ifstream f(std::string(DFORGE_SOURCE_DIR) + "/configs/" + name);
  REQUIRE(f);
  return json::parse(f);
}

json gauss_family(std::vector<double> mean) {
  json id = json::array();
  for (std::size_t i = 0; i < mean.size(); ++i) {
    std::vector<double> row(mean.size(), 0.0);
    row[i] = 1.0;
    id.push_back(row);
  }
  return {{"kind", "gaussian"},
          {"mean", {{"type", "singleton"}, {"point", mean}}},
          {"covariance", {{"type", "singleton"}, {"matrix", id}}}};
}

std::string error_path(const json& cfg, RunOptions o = {}) {
  try {
    run(cfg, o);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("pair: symmetric Gaussian closed form") {
  json cfg = load("pair_gaussian.json");
  RunReport r = run(cfg, {});
  CHECK(r.report["results"]["detector"]["risk"].get<double>() == doctest::Approx(0.60653066).epsilon(1e-6));
  CHECK(r.report["results"]["K"] == 10);
  REQUIRE(r.mc.size() == 4);
  for (const McRow& m : r.mc) CHECK(m.report.pass);
  CHECK(r.warnings.empty());
}

TEST_CASE("pair: identical families are indistinguishable") {
  json cfg = {{"schema_version", "1.0"}, {"task", "pair"}, {"families", {gauss_family({1, 0}), gauss_family({1, 0})}}};
  RunReport r = run(cfg, {});
  CHECK(r.report["results"]["detector"]["risk"].get<double>() == doctest::Approx(1.0));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("indistinguishable") != std::string::npos);
  cfg["pair"] = {{"target_risk", 0.1}};
  CHECK_THROWS_AS(run(cfg, {}), Infeasible);
}

TEST_CASE("config errors name the field") {
  json cfg = load("pair_gaussian.json");
  json bad = cfg;
  bad["families"][1]["covariance"]["matrix"] = {{1, 2}, {2, 1}};
  CHECK(error_path(bad) == "families[1].covariance.matrix");
  bad = cfg;
  bad["families"][0]["mean"]["point"] = {1, 0, 0};
  CHECK(error_path(bad) == "families[0].covariance.matrix");
  bad = cfg;
  bad["families"][0]["mean"]["typo"] = 1;
  CHECK(error_path(bad) == "families[0].mean.typo");
  bad = cfg;
  bad["schema_version"] = "0.9";
  CHECK(error_path(bad) == "schema_version");
  bad = cfg;
  bad["pair"]["K"] = 0;
  bad["pair"].erase("target_risk");
  CHECK(error_path(bad) == "pair.K");
  bad = cfg;
  bad["pair"]["K"] = 3;
  CHECK(error_path(bad) == "pair");
  bad = cfg;
  bad["pair"]["mc"]["trials"] = 10;
  CHECK(error_path(bad) == "pair.mc.trials");
  bad = cfg;
  bad["families"][0]["kind"] = "laplace";
  CHECK(error_path(bad) == "families[0].kind");
  bad = cfg;
  bad.erase("task");
  CHECK(error_path(bad) == "task");
  RunOptions o;
  o.tol = 2.0;
  CHECK(error_path(cfg, o) == "solver.tol");
}

TEST_CASE("validate only checks the config") {
  RunOptions o;
  o.validate_only = true;
  for (const char* f : {"pair_gaussian.json", "pair_poisson.json", "multitest_gaussian.json", "color_gaussian.json",
                        "aggregate_fast.json", "aggregate_generic.json", "quadlift_variance.json",
                        "simulate_detector.json"}) {
    CAPTURE(f);
    RunReport r = run(load(f), o);
    CHECK(r.report["results"]["valid"] == true);
    CHECK(r.mc.empty());
  }
}

TEST_CASE("color: Perron shifts equalize rows") {
  RunReport r = run(load("color_gaussian.json"), {});
  const json& res = r.report["results"];
  CHECK(res["row_equalization_residual"].get<double>() < 1e-8);
  CHECK(res["eps_hat"].get<double>() < 0.1);
  CHECK(res["color"] == 0);
  for (const McRow& m : r.mc) CHECK(m.report.pass);
}

TEST_CASE("multitest report") {
  RunReport r = run(load("multitest_gaussian.json"), {});
  const json& res = r.report["results"];
  CHECK(res["eps_hat"].get<double>() <= 0.05);
  CHECK(res["detectors"].size() == 3);
  CHECK(res["row_equalization_residual"].get<double>() < 1e-8);
  for (const McRow& m : r.mc) CHECK(m.report.pass);
}

TEST_CASE("aggregate: closed-form deltas") {
  RunReport r = run(load("aggregate_fast.json"), {});
  // unit Voronoi normals and Theta = I: delta = sqrt(ln(L sqrt(L-1) / (eps K)))
  const double expect = std::sqrt(std::log(4.0 * std::sqrt(3.0) / (0.1 * 20)));
  for (const json& d : r.report["results"]["deltas"]) CHECK(std::abs(d.get<double>() - expect) <= 1e-12);
  REQUIRE(r.mc.size() == 1);
  CHECK(r.mc[0].report.pass);

  RunReport g = run(load("aggregate_generic.json"), {});
  CHECK(g.report["results"]["procedures"].size() == 3);
  CHECK(g.mc[0].report.pass);
}

TEST_CASE("quadlift report") {
  RunReport r = run(load("quadlift_variance.json"), {});
  const json& res = r.report["results"];
  CHECK(res["detector"]["converged"] == true);
  CHECK(res["detector"]["risk"].get<double>() < 0.9);
  CHECK(res["affine"]["risk"].get<double>() == doctest::Approx(1.0));
  for (const McRow& m : r.mc) CHECK(m.report.pass);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  for (const char* f : {"simulate_detector.json", "color_gaussian.json", "pair_poisson.json"}) {
    CAPTURE(f);
    json cfg = load(f);
    RunOptions o1, o4;
    o1.threads = 1;
    o4.threads = 4;
    RunReport a = run(cfg, o1), b = run(cfg, o4), c = run(cfg, o1);
    CHECK(a.json_text() == b.json_text());
    CHECK(a.json_text() == c.json_text());
    CHECK(a.csv() == b.csv());
    RunOptions s;
    s.seed = 999;
    CHECK(run(cfg, s).csv() != a.csv());
  }
}

TEST_CASE("echoed inputs reproduce the report") {
  RunOptions o;
  o.seed = 12345;
  o.tol = 1e-7;
  RunReport a = run(load("pair_poisson.json"), o);
  CHECK(a.report["inputs"]["seed"] == 12345);
  CHECK(a.report["inputs"]["solver"]["tol"] == 1e-7);
  RunReport b = run(a.report["inputs"], {});
  CHECK(a.json_text() == b.json_text());
}

TEST_CASE("csv and text outputs") {
  RunReport r = run(load("simulate_detector.json"), {});
  std::string csv = r.csv();
  CHECK(csv.rfind("name,estimate,std_error,n,bound,pass\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  std::string txt = r.text(0.25);
  CHECK(txt.find("wall time 0.250 s") != std::string::npos);
  CHECK(r.json_text().find("wall") == std::string::npos);
}
