#include <chrono>
#include <cmath>

#include "dforge/convex_set.hpp"
#include "dforge/saddle.hpp"
#include "test_util.hpp"

using namespace dforge;
using dforge::testing::rand_simplex;
using dforge::testing::rand_spd;
using dforge::testing::randn;
using dforge::testing::randu;

namespace {

RegularData gauss_point(const Vec& theta, const Mat& cov) {
  return sub_gaussian_family(singleton(sub_gaussian_param(theta, cov)));
}

RegularData gauss_box(const Vec& lo, const Vec& hi, const Mat& cov) {
  return sub_gaussian_family(box(lo, hi), singleton(vec(cov)));
}

void check_saddle_inequalities(const SaddleProblem& p, const SaddleSolution& s, CounterRng& rng) {
  const double slack = s.gap + 1e-9 * std::max(1.0, std::abs(s.sad_val));
  double at_star = p.psi(s.h_star, s.mu1_star, s.mu2_star);
  for (int k = 0; k < 50; ++k) {
    Vec m1 = p.data1.M().project(randn(rng, p.data1.param_dim(), 3.0));
    Vec m2 = p.data2.M().project(randn(rng, p.data2.param_dim(), 3.0));
    CHECK(p.psi(s.h_star, m1, m2) <= at_star + slack);
    Vec h = p.data1.H().project(s.h_star + randn(rng, p.data1.obs_dim(), 2.0));
    CHECK(p.psi(h, s.mu1_star, s.mu2_star) >= at_star - slack);
  }
  BestResponse br = best_response(s.h_star, p);
  CHECK(br.value - at_star <= slack);
  CHECK(s.gap >= 0.0);
  CHECK(p.data1.M().contains(s.mu1_star, 1e-7));
  CHECK(p.data2.M().contains(s.mu2_star, 1e-7));
  CHECK(p.data1.H().contains(s.h_star, 1e-7));
}

}  // namespace

TEST_CASE("identical hypotheses give h* = 0 and value 0") {
  Mat cov = Mat::Identity(2, 2);
  SUBCASE("sub-Gaussian") {
    RegularData d = gauss_box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), cov);
    SaddleSolution s = solve_saddle(SaddleProblem(d, d));
    CHECK(s.certified);
    CHECK(std::abs(s.sad_val) < 1e-6);
    CHECK(s.h_star.norm() < 1e-4);
  }
  SUBCASE("poisson") {
    RegularData d = poisson_family(box(Vec::Constant(3, 1.0), Vec::Constant(3, 4.0)));
    SaddleSolution s = solve_saddle(SaddleProblem(d, d));
    CHECK(s.certified);
    CHECK(std::abs(s.sad_val) < 1e-6);
  }
  SUBCASE("discrete") {
    RegularData d = discrete_family(std::make_shared<Simplex>(3));
    SaddleSolution s = solve_saddle(SaddleProblem(d, d));
    CHECK(s.certified);
    CHECK(std::abs(s.sad_val) < 1e-6);
  }
}

TEST_CASE("gaussian singleton pair") {
  Vec t1(2), t2(2);
  t1 << 2.0, 0.0;
  t2 << 0.0, 0.0;
  Mat id = Mat::Identity(2, 2);
  SaddleProblem p(gauss_point(t1, id), gauss_point(t2, id));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  CHECK(s.sad_val == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(std::exp(s.sad_val) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(s.h_star(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(s.h_star(1)) < 1e-4);
  CounterRng rng(11);
  check_saddle_inequalities(p, s, rng);
}

TEST_CASE("discrete singleton pair reaches the Hellinger affinity") {
  Vec m1(2), m2(2);
  m1 << 0.8, 0.2;
  m2 << 0.2, 0.8;
  SaddleProblem p(discrete_family(singleton(m1)), discrete_family(singleton(m2)));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  CHECK(s.sad_val == doctest::Approx(std::log(0.8)).epsilon(1e-6));

  // brute force on a grid over [-5,5]^2
  double best = INFINITY;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      Vec h(2);
      h << -5.0 + 0.05 * i, -5.0 + 0.05 * j;
      best = std::min(best, p.psi(h, m1, m2));
    }
  CHECK(s.sad_val <= best + 1e-9);
  CHECK(best - s.sad_val < 1e-3);
}

TEST_CASE("best response") {
  SUBCASE("singletons") {
    Vec t1 = Vec::Constant(2, 1.0), t2 = Vec::Constant(2, -0.5);
    Mat id = Mat::Identity(2, 2);
    SaddleProblem p(gauss_point(t1, id), gauss_point(t2, id));
    Vec h(2);
    h << 0.3, -0.7;
    BestResponse br = best_response(h, p);
    CHECK((br.mu1 - sub_gaussian_param(t1, id)).norm() < 1e-14);
    CHECK((br.mu2 - sub_gaussian_param(t2, id)).norm() < 1e-14);
    CHECK(br.value == doctest::Approx(p.psi(h, br.mu1, br.mu2)));
  }
  SUBCASE("box vertex") {
    Mat id = Mat::Identity(3, 3);
    RegularData d = gauss_box(Vec::Constant(3, -1.0), Vec::Constant(3, 2.0), id);
    SaddleProblem p(d, d);
    Vec h(3);
    h << 0.5, -1.5, 2.0;
    auto [mu, val] = maximize_phi(d, -h);
    Vec theta = mu.head(3);
    for (int i = 0; i < 3; ++i) CHECK(theta(i) == (-h(i) > 0 ? 2.0 : -1.0));
    CHECK(val == doctest::Approx(theta.dot(-h) + 0.5 * h.squaredNorm()));
  }
  SUBCASE("discrete at h = 0") {
    RegularData d = discrete_family(std::make_shared<Simplex>(4));
    SaddleProblem p(d, d);
    CHECK(std::abs(best_response(Vec::Zero(4), p).value) < 1e-12);
  }
  SUBCASE("poisson matches the box corner") {
    RegularData d = poisson_family(box(Vec::Constant(2, 1.0), Vec::Constant(2, 3.0)));
    Vec h(2);
    h << 0.4, -0.2;
    auto [mu, val] = maximize_phi(d, h);
    CHECK(mu(0) == doctest::Approx(3.0));
    CHECK(mu(1) == doctest::Approx(1.0));
    CHECK(val == doctest::Approx(3.0 * std::expm1(0.4) + std::expm1(-0.2)));
  }
}

TEST_CASE("random gaussian singleton pairs match the closed form") {
  CounterRng rng(2024);
  for (int k = 0; k < 20; ++k) {
    Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 8.0);
    d = std::min<Eigen::Index>(d, 8);
    Mat cov = rand_spd(rng, d);
    Vec t1 = randn(rng, d), t2 = randn(rng, d);
    SaddleProblem p(gauss_point(t1, cov), gauss_point(t2, cov));
    SaddleSolution s = solve_saddle(p);
    Vec diff = t1 - t2;
    double expect = -0.125 * diff.dot(cov.ldlt().solve(diff));
    CAPTURE(k);
    CAPTURE(d);
    CHECK(s.certified);
    CHECK(std::abs(s.sad_val - expect) < 1e-6);
  }
}

TEST_CASE("composite gaussian boxes") {
  // U1 = {x1 in [1,3]}, U2 = {x1 in [-3,-1]}, other coordinate in [-2,2]
  Vec lo1(2), hi1(2), lo2(2), hi2(2);
  lo1 << 1, -2;
  hi1 << 3, 2;
  lo2 << -3, -2;
  hi2 << -1, 2;
  Mat id = Mat::Identity(2, 2);
  SaddleProblem p(gauss_box(lo1, hi1, id), gauss_box(lo2, hi2, id));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  CHECK(s.sad_val == doctest::Approx(-0.5).epsilon(1e-6));
  CounterRng rng(5);
  check_saddle_inequalities(p, s, rng);
}

TEST_CASE("poisson box pair satisfies the saddle inequalities") {
  SaddleProblem p(poisson_family(box(Vec::Constant(3, 1.0), Vec::Constant(3, 2.0))),
                  poisson_family(box(Vec::Constant(3, 4.0), Vec::Constant(3, 6.0))));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  // the closest pair is (2,2,2) vs (4,4,4); Hellinger affinity per coordinate
  double expect = 3.0 * (-0.5 * std::pow(std::sqrt(4.0) - std::sqrt(2.0), 2));
  CHECK(s.sad_val == doctest::Approx(expect).epsilon(1e-6));
  CounterRng rng(6);
  check_saddle_inequalities(p, s, rng);
}

TEST_CASE("random starts agree on the saddle value") {
  CounterRng rng(77);
  Eigen::Index d = 3;
  Mat cov = rand_spd(rng, d);
  Vec lo1 = randu(rng, d, 0.5, 1.0), lo2 = randu(rng, d, -2.0, -1.0);
  RegularData d1 = gauss_box(lo1, lo1 + Vec::Constant(d, 1.0), cov);
  RegularData d2 = gauss_box(lo2, lo2 + Vec::Constant(d, 1.0), cov);
  SaddleOptions o1, o2;
  o1.random_start = o2.random_start = true;
  o1.seed = 1;
  o2.seed = 99;
  SaddleSolution a = solve_saddle(SaddleProblem(d1, d2, o1));
  SaddleSolution b = solve_saddle(SaddleProblem(d1, d2, o2));
  CHECK(a.certified);
  CHECK(b.certified);
  CHECK(std::abs(a.sad_val - b.sad_val) <= 2.0 * o1.tol * std::max(1.0, std::abs(a.sad_val)));
}

TEST_CASE("discrete composite pair") {
  CounterRng rng(8);
  // M1 = {mu : mu_0 >= 0.6}, M2 = {mu : mu_0 <= 0.2} on the 3-simplex
  Mat a1(1, 3), a2(1, 3);
  a1 << -1, 0, 0;
  a2 << 1, 0, 0;
  Vec b1(1), b2(1);
  b1 << -0.6;
  b2 << 0.2;
  SetPtr simplex = std::make_shared<Simplex>(3);
  SetPtr m1 = std::make_shared<HalfSpaceIntersection>(simplex, a1, b1);
  SetPtr m2 = std::make_shared<HalfSpaceIntersection>(simplex, a2, b2);
  SaddleProblem p(discrete_family(m1), discrete_family(m2));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  CHECK(s.sad_val < 0.0);
  check_saddle_inequalities(p, s, rng);
  // value is the Hellinger affinity of the closest pair: check against a grid on M1 x M2
  double best = -INFINITY;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 20; ++j) {
      Vec p1(3), p2(3);
      double x = 0.6 + 0.01 * i, y = 0.01 * j;
      for (int u = 0; u <= 10; ++u)
        for (int v = 0; v <= 10; ++v) {
          p1 << x, (1 - x) * u / 10.0, (1 - x) * (10 - u) / 10.0;
          p2 << y, (1 - y) * v / 10.0, (1 - y) * (10 - v) / 10.0;
          best = std::max(best, std::log(p1.cwiseProduct(p2).cwiseSqrt().sum()));
        }
    }
  CHECK(s.sad_val >= best - 1e-9);
  CHECK(s.sad_val - best < 1e-3);
}

TEST_CASE("bounded support pair") {
  // X = [-1,1]^2, means in small boxes around (+-0.5, 0)
  SetPtr x = box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  Vec c(2);
  c << 0.5, 0.0;
  SaddleProblem p(bounded_support_family(x, box(c - Vec::Constant(2, 0.1), c + Vec::Constant(2, 0.1))),
                  bounded_support_family(x, box(-c - Vec::Constant(2, 0.1), -c + Vec::Constant(2, 0.1))));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  CHECK(s.sad_val < 0.0);
  CounterRng rng(9);
  check_saddle_inequalities(p, s, rng);
  // along h = (t, 0): value is -0.4 t + t^2/2, minimum -0.08 at t = 0.4
  CHECK(s.sad_val <= -0.08 + 1e-6);
}

TEST_CASE("disjoint discrete supports are flagged degenerate") {
  Vec m1(2), m2(2);
  m1 << 1.0, 0.0;
  m2 << 0.0, 1.0;
  SaddleProblem p(discrete_family(singleton(m1)), discrete_family(singleton(m2)));
  SaddleSolution s;
  try {
    s = solve_saddle(p);
  } catch (const SaddleNonConvergence& e) {
    s = e.best();
  }
  CHECK(s.degenerate);
  CHECK_FALSE(s.certified);
  CHECK(s.sad_val < -1e3);
  CHECK(std::exp(s.sad_val) < 1e-100);
}

TEST_CASE("problem validation") {
  Mat id2 = Mat::Identity(2, 2), id3 = Mat::Identity(3, 3);
  CHECK_THROWS_AS(SaddleProblem(gauss_point(Vec::Zero(2), id2), gauss_point(Vec::Zero(3), id3)),
                  InvalidArgument);
  RegularData bounded_h(box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)),
                        singleton(sub_gaussian_param(Vec::Zero(2), id2)),
                        gauss_point(Vec::Zero(2), id2).oracle(), FamilyKind::custom);
  CHECK_THROWS_AS(SaddleProblem(bounded_h, gauss_point(Vec::Zero(2), id2)), InvalidArgument);
  SaddleOptions bad;
  bad.tol = -1.0;
  CHECK_THROWS_AS(SaddleProblem(gauss_point(Vec::Zero(2), id2), gauss_point(Vec::Zero(2), id2), bad),
                  InvalidArgument);
}

TEST_CASE("bounded H without truncation") {
  Mat id = Mat::Identity(2, 2);
  SetPtr hset = box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5));
  Vec t1(2);
  t1 << 2.0, 0.0;
  auto restrict = [&](const RegularData& d) {
    return RegularData(hset, d.M_ptr(), d.oracle(), FamilyKind::custom);
  };
  SaddleProblem p(restrict(gauss_point(t1, id)), restrict(gauss_point(Vec::Zero(2), id)));
  SaddleSolution s = solve_saddle(p);
  CHECK(s.certified);
  // psi((t,0)) = -t + t^2/2, clipped at t = 0.5
  CHECK(s.h_star(0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(s.sad_val == doctest::Approx(-0.375).epsilon(1e-6));
  CHECK(std::isinf(s.radius));
}
