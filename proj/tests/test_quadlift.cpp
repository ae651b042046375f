#include <chrono>
#include <cmath>

#include "dforge/convex_set.hpp"
#include "dforge/quadlift.hpp"
#include "test_util.hpp"

using namespace dforge;
using dforge::testing::rand_spd;
using dforge::testing::randn;
using dforge::testing::randu;

namespace {

Mat rand_mat(CounterRng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

QuadLiftSpec spec_of(Mat a, SetPtr u, const Mat& theta) {
  QuadLiftSpec s;
  s.A = std::move(a);
  s.U = std::move(u);
  s.Ucov = singleton(vec(theta));
  s.theta_star = theta;
  return s;
}

// ln E exp(h'z + z'Hz/2) for z ~ N(theta, cov)
double gaussian_log_mgf(const Vec& h, const Mat& hm, const Vec& theta, const Mat& cov) {
  const Eigen::Index d = h.size();
  Mat id = Mat::Identity(d, d);
  double logdet = std::log((id - cov * hm).determinant());
  Vec s = h + hm * theta;
  Mat r = (cov.inverse() - hm).inverse();
  return -0.5 * logdet + h.dot(theta) + 0.5 * theta.dot(hm * theta) + 0.5 * s.dot(r * s);
}

// random H with spectral radius of T H T equal to frac * gamma
Mat rand_h(CounterRng& rng, const LiftContext& c, double frac) {
  Mat g = sym(rand_mat(rng, c.d, c.d));
  g /= spectral_norm(g);
  return sym(c.T_inv * (frac * c.spec.gamma * g) * c.T_inv);
}

}  // namespace

TEST_CASE("Shor box support") {
  SUBCASE("one dimension is exact") {
    auto z = LiftZ::box(Vec::Constant(1, -1.0), Vec::Constant(1, 2.0));
    CounterRng rng(3, 0);
    for (int t = 0; t < 30; ++t) {
      Mat w = sym(rand_mat(rng, 2, 2));
      double best = -INFINITY;
      for (int k = 0; k <= 30000; ++k) {
        double u = -1.0 + 3.0 * k / 30000.0;
        best = std::max(best, w(0, 0) * u * u + 2 * w(0, 1) * u + w(1, 1));
      }
      ZSupport s = z->support(w);
      CHECK(s.value == doctest::Approx(best).epsilon(1e-7));
      CHECK(s.value >= best - 1e-9);
      CHECK(s.maximizer(1, 1) == doctest::Approx(1.0));
    }
  }
  SUBCASE("upper bound in two dimensions, exact for linear objectives") {
    Vec lo(2), hi(2);
    lo << -1, 0;
    hi << 1, 3;
    auto z = LiftZ::box(lo, hi);
    CounterRng rng(4, 0);
    for (int t = 0; t < 20; ++t) {
      Mat w = sym(rand_mat(rng, 3, 3));
      double best = -INFINITY;
      for (int i = 0; i <= 300; ++i)
        for (int j = 0; j <= 300; ++j) {
          Vec e(3);
          e << -1.0 + 2.0 * i / 300, 3.0 * j / 300, 1.0;
          best = std::max(best, e.dot(w * e));
        }
      CHECK(z->support(w).value >= best - 1e-9);

      Mat lin = w;
      lin.topLeftCorner(2, 2).setZero();
      double exact = lin(2, 2);
      for (int k = 0; k < 2; ++k) exact += 2.0 * std::max(lin(k, 2) * lo(k), lin(k, 2) * hi(k));
      CHECK(z->support(lin).value == doctest::Approx(exact).epsilon(1e-9));
    }
  }
  SUBCASE("ball") {
    auto z = LiftZ::ball(Vec::Zero(2), 2.0);
    Mat w = Mat::Zero(3, 3);
    w(0, 0) = 1.0;
    w(0, 2) = w(2, 0) = 0.5;
    // max over |u| <= 2 of u1^2 + u1: 6 at u1 = 2
    CHECK(z->support(w).value == doctest::Approx(6.0).epsilon(1e-8));
    CHECK(z->contains_lift(Vec::Constant(2, 1.0)));
    CHECK_FALSE(z->contains_lift(Vec::Constant(2, 1.5)));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(LiftZ::box(Vec::Zero(2), Vec::Constant(2, -1.0)), InvalidArgument);
    Mat c = Mat::Zero(3, 3);
    c(0, 0) = 1.0;
    CHECK_THROWS_AS(LiftZ::shor({c}), InvalidArgument);  // u2 unconstrained
    CHECK_THROWS_AS(LiftZ::from_set(Simplex(3)), CapabilityError);
  }
}

TEST_CASE("lifted Phi basic identities") {
  CounterRng rng(7, 0);
  const Eigen::Index d = 3, m = 2;
  Mat a = rand_mat(rng, d, m + 1);
  Vec lo = -Vec::Ones(m), hi = 2.0 * Vec::Ones(m);
  Mat theta = rand_spd(rng, d);
  LiftContext c = make_lift_context(spec_of(a, box(lo, hi), theta));
  CHECK(c.delta < 1e-12);
  CHECK(lifted_phi(c, Vec::Zero(d), Mat::Zero(d, d), theta) == doctest::Approx(0.0).scale(1.0));

  for (int t = 0; t < 10; ++t) {
    Vec h = randn(rng, d);
    double best = -INFINITY;
    for (int i = 0; i < 4; ++i) {
      Vec u(m);
      u << (i & 1 ? hi(0) : lo(0)), (i & 2 ? hi(1) : lo(1));
      Vec e(m + 1);
      e << u, 1.0;
      best = std::max(best, h.dot(a * e));
    }
    CHECK(lifted_phi(c, h, Mat::Zero(d, d), theta) ==
          doctest::Approx(best + 0.5 * h.dot(theta * h)).epsilon(1e-9));
  }

  // midpoint convexity in (h, H)
  for (int t = 0; t < 20; ++t) {
    Vec h1 = randn(rng, d), h2 = randn(rng, d);
    Mat m1 = rand_h(rng, c, 0.9), m2 = rand_h(rng, c, 0.9);
    double mid = lifted_phi(c, 0.5 * (h1 + h2), 0.5 * (m1 + m2), theta);
    double avg = 0.5 * (lifted_phi(c, h1, m1, theta) + lifted_phi(c, h2, m2, theta));
    CHECK(mid <= avg + 1e-9 * (1.0 + std::abs(avg)));
  }

  // true log-MGF at every mean in U is dominated
  for (int t = 0; t < 20; ++t) {
    Vec h = randn(rng, d);
    Mat hm = rand_h(rng, c, 0.95);
    double phi = lifted_phi(c, h, hm, theta);
    for (int k = 0; k < 10; ++k) {
      Vec e(m + 1);
      e << randu(rng, m, -1.0, 2.0), 1.0;
      CHECK(gaussian_log_mgf(h, hm, a * e, theta) <= phi + 1e-9 * (1.0 + std::abs(phi)));
    }
  }

  CHECK_THROWS_AS(lifted_phi(c, Vec::Zero(d), 1.01 * c.spec.gamma * c.theta_inv, theta), DomainError);
}

TEST_CASE("lifted Phi gradients") {
  CounterRng rng(8, 0);
  const Eigen::Index d = 2, m = 1;
  Mat a = rand_mat(rng, d, m + 1);
  Mat theta = rand_spd(rng, d);
  QuadLiftSpec s = spec_of(a, box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)), theta);
  RegularData data = lift_gaussian(s);
  CHECK(data.obs_dim() == d + d * d);
  CHECK(data.param_dim() == d * d);
  LiftContext c = make_lift_context(s);
  for (int t = 0; t < 10; ++t) {
    Vec h = randn(rng, d);
    Mat hm = rand_h(rng, c, 0.5);
    Vec x(d + d * d);
    x << h, vec(hm);
    Vec g = data.grad_h(x, vec(theta));
    // symmetric perturbation directions keep H symmetric
    for (int k = 0; k < 4; ++k) {
      Vec dh = randn(rng, d);
      Mat dm = sym(rand_mat(rng, d, d));
      Vec dx(d + d * d);
      dx << dh, vec(dm);
      const double e = 1e-6;
      double fd = (data.phi(x + e * dx, vec(theta)) - data.phi(x - e * dx, vec(theta))) / (2 * e);
      CHECK(fd == doctest::Approx(g.dot(dx)).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("lifted family MGF contract under a covariance interval") {
  const Eigen::Index d = 2, m = 2;
  CounterRng rng(9, 0);
  Mat a(d, m + 1);
  a << 1.0, 0.5, 0.2, -0.3, 1.0, 0.0;
  QuadLiftSpec s;
  s.A = a;
  s.U = box(Vec::Constant(m, -1.0), Vec::Constant(m, 1.0));
  s.Ucov = std::make_shared<PsdInterval>(Mat(0.5 * Mat::Identity(d, d)), Mat(Mat::Identity(d, d)));
  s.theta_star = Mat::Identity(d, d);
  LiftContext c = make_lift_context(s);
  CHECK(c.delta == doctest::Approx(1.0 - std::sqrt(0.5)));

  const int n = 100000;
  int checked = 0;
  for (double hs : {-0.5, 0.0, 0.7})
    for (double frac : {-0.4, 0.0, 0.3}) {
      Vec h = hs * Vec::Ones(d);
      Mat hm = frac * c.spec.gamma * Mat::Identity(d, d);
      hm(0, 1) = hm(1, 0) = 0.05;
      for (double sc : {0.5, 0.8, 1.0}) {
        Mat cov = sc * Mat::Identity(d, d);
        double phi = lifted_phi(c, h, hm, cov);
        Vec u = randu(rng, m, -1.0, 1.0);
        Vec e(m + 1);
        e << u, 1.0;
        Vec mean = a * e;
        CHECK(gaussian_log_mgf(h, hm, mean, cov) <= phi + 1e-12);
        Mat l = sqrtm_psd(cov);
        double s1 = 0.0, s2 = 0.0;
        for (int k = 0; k < n; ++k) {
          Vec z = mean + l * randn(rng, d);
          double v = std::exp(h.dot(z) + 0.5 * z.dot(hm * z));
          s1 += v;
          s2 += v * v;
        }
        double avg = s1 / n;
        double se = std::sqrt(std::max(0.0, s2 / n - avg * avg) / n);
        CHECK(avg <= std::exp(phi) + 3.0 * se);
        ++checked;
      }
    }
  CHECK(checked == 27);
}

TEST_CASE("projection onto H_gamma and delta") {
  CounterRng rng(10, 0);
  Mat theta = rand_spd(rng, 3);
  Mat t = sqrtm_psd(theta);
  for (int k = 0; k < 10; ++k) {
    Mat h = sym(rand_mat(rng, 3, 3, 3.0));
    Mat p = project_h_gamma(h, theta, 0.9);
    Mat ht = sym(t * p * t);
    CHECK(max_eigenvalue(ht) <= 0.9 + 1e-12);
    CHECK(min_eigenvalue(ht) >= -0.9 - 1e-12);
    CHECK((project_h_gamma(p, theta, 0.9) - p).norm() < 1e-10);
  }
  Mat id = Mat::Identity(2, 2);
  CHECK(compute_delta(Singleton(vec(Mat(0.25 * id))), id) == doctest::Approx(0.5));
  CHECK(compute_delta(PsdInterval(Mat(0.25 * id), Mat(id)), id) == doctest::Approx(0.5));
  CHECK(compute_delta(PsdInterval(std::nullopt, Mat(4.0 * id)), Mat(4.0 * id)) == doctest::Approx(1.0));
  Mat lo = id;
  lo(0, 0) = 0.5;
  CHECK(compute_delta(PsdInterval(lo, Mat(id)), id) == 2.0);

  QuadLiftSpec s = spec_of(Mat::Ones(2, 2), box(Vec::Zero(1), Vec::Ones(1)), id);
  s.Ucov = singleton(vec(Mat(2.0 * id)));
  CHECK_THROWS_AS(make_lift_context(s), InvalidParameter);  // Theta* must dominate
  s.Ucov = singleton(vec(id));
  s.gamma = 1.0;
  CHECK_THROWS_AS(make_lift_context(s), InvalidArgument);
  s.gamma = 0.9;
  s.U = std::make_shared<WholeSpace>(1);
  CHECK_THROWS_AS(make_lift_context(s), InvalidArgument);
  s.U = box(Vec::Zero(1), Vec::Ones(1));
  s.Ucov = singleton(vec(Mat(0.25 * id)));
  s.delta = 0.1;
  CHECK_THROWS_AS(make_lift_context(s), InvalidParameter);
}

TEST_CASE("identical hypotheses give risk one") {
  CounterRng rng(12, 0);
  Mat a = rand_mat(rng, 2, 3);
  Mat theta = rand_spd(rng, 2);
  QuadLiftSpec s = spec_of(a, box(-Vec::Ones(2), Vec::Ones(2)), theta);
  QuadDetector q = solve_quad_detector(s, s);
  CHECK(q.risk == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("quadratic never loses to affine under singleton covariances") {
  CounterRng rng(13, 0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index d = 3, m = 2;
    Mat a1 = rand_mat(rng, d, m + 1), a2 = rand_mat(rng, d, m + 1);
    Vec lo1 = randu(rng, m, -1.0, 0.0), lo2 = randu(rng, m, -1.0, 0.0);
    QuadLiftSpec s1 = spec_of(a1, box(lo1, lo1 + Vec::Ones(m)), rand_spd(rng, d));
    QuadLiftSpec s2 = spec_of(a2, box(lo2, lo2 + Vec::Ones(m)), rand_spd(rng, d));
    AffineDetector aff = special_case_affine(s1, s2);
    QuadSolveOptions o;
    o.mode = QuadMode::affine_only;
    QuadDetector h0 = solve_quad_detector(s1, s2, o);
    QuadDetector full = solve_quad_detector(s1, s2);
    CHECK(h0.H.norm() == 0.0);
    CHECK(h0.risk == doctest::Approx(aff.risk).epsilon(1e-5));
    CHECK(full.risk <= aff.risk + 1e-5);
  }
}

TEST_CASE("special case matches the symmetric Gaussian detector") {
  CounterRng rng(14, 0);
  const Eigen::Index d = 3;
  Mat theta = rand_spd(rng, d);
  Vec c1 = randn(rng, d), c2 = randn(rng, d);
  Mat a1(d, d + 1), a2(d, d + 1);
  a1 << Mat::Identity(d, d), c1;
  a2 << Mat::Identity(d, d), c2;
  SetPtr u = box(-0.3 * Vec::Ones(d), 0.3 * Vec::Ones(d));
  AffineDetector aff = special_case_affine(spec_of(a1, u, theta), spec_of(a2, u, theta));
  GaussianPairSpec g;
  g.U1 = box(c1 - 0.3 * Vec::Ones(d), c1 + 0.3 * Vec::Ones(d));
  g.U2 = box(c2 - 0.3 * Vec::Ones(d), c2 + 0.3 * Vec::Ones(d));
  g.theta_star = theta;
  GaussianDetector ref = gaussian_symmetric_detector(g);
  CHECK(aff.risk == doctest::Approx(ref.detector.risk).epsilon(1e-6));
}

TEST_CASE("variance discrimination with overlapping means") {
  // rank-4 mean map with A 1 = 0, so both mean sets contain 0
  CounterRng rng(15, 0);
  const Eigen::Index d = 8, m = 12;
  const double rho = 0.01, r = 10.0;
  Mat b = rand_mat(rng, d, 4) * rand_mat(rng, 4, m) / std::sqrt(4.0 * m);
  for (Eigen::Index i = 0; i < d; ++i) b.row(i).array() -= b.row(i).mean();
  Mat a(d, m + 1);
  a << b, Vec::Zero(d);
  Mat id = Mat::Identity(d, d);
  QuadLiftSpec s1 = spec_of(a, box(Vec::Constant(m, rho), Vec::Constant(m, rho + r)), id);
  QuadLiftSpec s2 = spec_of(a, box(Vec::Constant(m, -rho - r), Vec::Constant(m, -rho)), Mat(16.0 * id));
  QuadSolveOptions o;
  o.mode = QuadMode::affine_only;
  QuadDetector aff = solve_quad_detector(s1, s2, o);
  QuadDetector full = solve_quad_detector(s1, s2);
  MESSAGE("affine " << aff.risk << " quadratic " << full.risk);
  CHECK(aff.risk >= 0.99);
  CHECK(full.risk <= 0.9);
}

TEST_CASE("equal variances: quadratic term does not help") {
  CounterRng rng(16, 0);
  const Eigen::Index d = 8, m = 12;
  const double rho = 1.0, r = 10.0;
  Mat a(d, m + 1);
  a << rand_mat(rng, d, m).cwiseAbs() * 0.1, Vec::Zero(d);
  Mat cov = 4.0 * Mat::Identity(d, d);
  QuadLiftSpec s1 = spec_of(a, box(Vec::Constant(m, rho), Vec::Constant(m, rho + r)), cov);
  QuadLiftSpec s2 = spec_of(a, box(Vec::Constant(m, -rho - r), Vec::Constant(m, -rho)), cov);
  QuadSolveOptions o;
  o.mode = QuadMode::affine_only;
  QuadDetector aff = solve_quad_detector(s1, s2, o);
  QuadDetector full = solve_quad_detector(s1, s2);
  o.mode = QuadMode::pure_quadratic;
  QuadDetector pure = solve_quad_detector(s1, s2, o);
  MESSAGE("affine " << aff.risk << " quadratic " << full.risk << " pure " << pure.risk);
  CHECK(aff.risk < 0.9);
  CHECK(std::abs(full.risk - aff.risk) <= 1e-3);
  CHECK(pure.risk >= 0.99);
  CHECK(pure.h.norm() == 0.0);
}

TEST_CASE("quadratic detector evaluation") {
  QuadDetector q;
  q.h = Vec::Ones(2);
  q.H = Mat::Identity(2, 2);
  q.a = -1.0;
  Vec z(2);
  z << 1.0, 2.0;
  CHECK(q(z) == doctest::Approx(3.0 + 2.5 - 1.0));
  Mat obs(2, 3);
  obs << 1, 0, -1, 2, 0, 1;
  Vec s = q.scores(obs);
  CHECK(s(0) == doctest::Approx(4.5));
  CHECK(s(1) == doctest::Approx(-1.0));
  CHECK(s(2) == doctest::Approx(0.0));
  Vec w = lift_observation(z);
  Vec x(6);
  x << q.h, vec(q.H);
  CHECK(x.dot(w) + q.a == doctest::Approx(q(z)));
}

TEST_CASE("bounded observations through a spectahedron oracle") {
  // zeta in [-1, 1]: Z = [[zeta^2, zeta], [zeta, 1]], z11 <= 1
  Mat q1 = Mat::Zero(2, 2);
  q1(0, 0) = 1.0;
  q1(1, 1) = -1.0;
  ZOracle oracle = [](const Mat& w) {
    ZSupport s;
    s.maximizer = Mat::Identity(2, 2);
    double b;
    if (w(0, 0) >= 0.0) {
      b = w(0, 1) >= 0.0 ? 1.0 : -1.0;
      s.maximizer(0, 0) = 1.0;
    } else {
      b = std::clamp(-w(0, 1) / w(0, 0), -1.0, 1.0);
      s.maximizer(0, 0) = b * b;
    }
    s.maximizer(0, 1) = s.maximizer(1, 0) = b;
    s.value = (w.array() * s.maximizer.array()).sum();
    return s;
  };
  SpectahedronSet x(2, {q1}, oracle);
  Vec in(4);
  in << 0.25, 0.5, 0.5, 1.0;
  CHECK(x.contains(in));
  Vec out(4);
  out << 0.1, 0.5, 0.5, 1.0;  // zeta^2 > z11
  CHECK_FALSE(x.contains(out));
  CHECK(x.contains(x.project(out), 1e-6));
  CHECK(x.bound_radius().has_value());

  RegularData data = lift_bounded_support(1, {q1}, oracle);
  CHECK(data.obs_dim() == 4);
  // zeta uniform on [-1, 1]: mean lift [1/3, 0, 0, 1]
  Vec mu(4);
  mu << 1.0 / 3.0, 0.0, 0.0, 1.0;
  CounterRng rng(17, 0);
  for (int t = 0; t < 10; ++t) {
    Vec w = randn(rng, 4);
    double lme = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
      double z = -1.0 + 2.0 * (k + 0.5) / n;
      lme += std::exp(w(0) * z * z + (w(1) + w(2)) * z + w(3));
    }
    lme = std::log(lme / n);
    CHECK(lme <= data.phi(w, mu) + 1e-9);
  }
  CHECK_THROWS_AS(lift_bounded_support(1, {q1}, nullptr), CapabilityError);

  RegularData sg = lift_bounded_subgaussian(box(-Vec::Ones(3), Vec::Ones(3)));
  CHECK(sg.obs_dim() == 3);
}
