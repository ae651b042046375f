#include <cmath>
#include <functional>

#include "dforge/errors.hpp"
#include "dforge/regular_data.hpp"
#include "test_util.hpp"

using namespace dforge;
using dforge::testing::rand_simplex;
using dforge::testing::rand_spd;
using dforge::testing::randn;
using dforge::testing::randu;

namespace {

using Sampler = std::function<Vec(CounterRng&)>;

// Midpoint convexity in h and concavity in mu on random triples.
void midpoint_suite(const RegularData& data, const Sampler& sample_h, int triples = 1000,
                    double tol = 1e-10) {
  CounterRng rng(77);
  auto ps = probe_points(data.M(), 24, 3.0);
  int bad_convex = 0, bad_concave = 0;
  for (int k = 0; k < triples; ++k) {
    Vec h1 = sample_h(rng), h2 = sample_h(rng);
    const Vec& mu1 = ps[rng.next_u64() % ps.size()];
    const Vec& mu2 = ps[rng.next_u64() % ps.size()];
    Vec mid_mu = data.M().project(0.5 * (mu1 + mu2));
    double a = data.phi(0.5 * (h1 + h2), mu1);
    double b = 0.5 * data.phi(h1, mu1) + 0.5 * data.phi(h2, mu1);
    if (a > b + tol * std::max(1.0, std::abs(b))) ++bad_convex;
    double c = data.phi(h1, mid_mu);
    double e = 0.5 * data.phi(h1, mu1) + 0.5 * data.phi(h1, mu2);
    if (c < e - tol * std::max(1.0, std::abs(e))) ++bad_concave;
  }
  CHECK(bad_convex == 0);
  CHECK(bad_concave == 0);
}

// Central finite differences against the oracle gradients.
void gradient_check(const RegularData& data, const Vec& h, const Vec& mu, double tol = 1e-6) {
  PhiEval e = data.eval(h, mu);
  const double s = 1e-6;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    Vec hp = h, hm = h;
    hp(i) += s;
    hm(i) -= s;
    double fd = (data.phi(hp, mu) - data.phi(hm, mu)) / (2 * s);
    CHECK(e.grad_h(i) == doctest::Approx(fd).epsilon(tol).scale(1.0));
  }
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    Vec mp = mu, mm = mu;
    mp(i) += s;
    mm(i) -= s;
    double fd = (data.phi(h, mp) - data.phi(h, mm)) / (2 * s);
    CHECK(e.grad_mu(i) == doctest::Approx(fd).epsilon(tol).scale(1.0));
  }
}

RegularData gaussian_singleton(const Vec& theta, const Mat& cov) {
  return sub_gaussian_family(singleton(sub_gaussian_param(theta, cov)));
}

}  // namespace

TEST_CASE("sub-Gaussian values") {
  Vec theta(2);
  theta << 1, 0;
  auto g = gaussian_singleton(theta, Mat::Identity(2, 2));
  Vec mu = sub_gaussian_param(theta, Mat::Identity(2, 2));
  CHECK(g.phi(Vec::Zero(2), mu) == 0.0);
  CHECK(g.phi(Vec::Ones(2), mu) == doctest::Approx(2.0).epsilon(1e-15));
  CounterRng rng(1);
  Vec z = sub_gaussian_param(Vec::Zero(2), Mat::Identity(2, 2));
  for (int k = 0; k < 20; ++k) {
    Vec h = randn(rng, 2);
    CHECK(g.phi(h, z) == doctest::Approx(g.phi(-h, z)).epsilon(1e-15));
  }
  gradient_check(g, randn(rng, 2), mu);
  CHECK(g.H().is_whole_space());
  CHECK(g.kind() == FamilyKind::sub_gaussian);
}

TEST_CASE("sub-Gaussian rejects non-psd covariance") {
  Mat bad(2, 2);
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(sub_gaussian_family(singleton(sub_gaussian_param(Vec::Zero(2), bad))),
                  InvalidParameter);
  CHECK_THROWS_AS(sub_gaussian_family(singleton(Vec::Zero(5))), InvalidArgument);
}

TEST_CASE("poisson values and errors") {
  auto p1 = poisson_family(singleton(Vec::Ones(1)));
  CHECK(p1.phi(Vec::Zero(1), Vec::Ones(1)) == 0.0);
  CHECK(p1.phi(Vec::Constant(1, std::log(2.0)), Vec::Ones(1)) == doctest::Approx(1.0).epsilon(1e-15));
  auto p2 = poisson_family(box(Vec::Zero(2), Vec::Constant(2, 3.0)));
  CHECK(p2.phi(Vec::Ones(2), Vec::Ones(2)) == doctest::Approx(2.0 * (std::exp(1.0) - 1.0)).epsilon(1e-15));
  CHECK(p2.phi(Vec::Ones(2), Vec::Ones(2)) == doctest::Approx(3.4366).epsilon(1e-4));
  CHECK_THROWS_AS(p2.phi(Vec::Ones(2), Vec::Constant(2, -1.0)), InvalidParameter);
  CHECK_THROWS_AS(poisson_family(box(Vec::Constant(2, -1.0), Vec::Ones(2))), InvalidParameter);
  CounterRng rng(2);
  gradient_check(p2, randn(rng, 2), randu(rng, 2, 0.5, 2.0));
}

TEST_CASE("discrete values and errors") {
  auto d = discrete_family(std::make_shared<Simplex>(2));
  Vec mu(2);
  mu << 0.5, 0.5;
  Vec h(2);
  h << std::log(2.0), 0.0;
  CHECK(d.phi(h, mu) == doctest::Approx(std::log(1.5)).epsilon(1e-15));
  CHECK(d.phi(Vec::Zero(2), mu) == 0.0);
  CHECK(d.phi(Vec::Constant(2, 0.7), mu) == doctest::Approx(0.7).epsilon(1e-15));
  Vec off(2);
  off << 0.6, 0.6;
  CHECK_THROWS_AS(d.phi(h, off), InvalidParameter);
  // tolerated rounding
  Vec near(2);
  near << 0.5 + 5e-10, 0.5;
  CHECK_NOTHROW(d.phi(h, near));
  CHECK_THROWS_AS(discrete_family(box(Vec::Zero(2), Vec::Ones(2))), InvalidParameter);
  CounterRng rng(3);
  auto d4 = discrete_family(std::make_shared<Simplex>(4));
  {
    Vec h4 = randn(rng, 4), m4 = rand_simplex(rng, 4);
    PhiEval e = d4.eval(h4, m4);
    double z = m4.dot(h4.array().exp().matrix());
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(e.grad_mu(i) == doctest::Approx(std::exp(h4(i)) / z).epsilon(1e-13));
      CHECK(e.grad_h(i) == doctest::Approx(m4(i) * std::exp(h4(i)) / z).epsilon(1e-13));
    }
  }
  // large h does not overflow
  Vec big = Vec::Constant(4, 800.0);
  CHECK(d4.phi(big, rand_simplex(rng, 4)) == doctest::Approx(800.0));
}

TEST_CASE("bounded support values") {
  auto x = box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
  auto bs = bounded_support_family(x, x);
  for (double t : {0.5, 1.0, 2.0}) {
    Vec h = Vec::Constant(1, t);
    double v = bs.phi(h, Vec::Zero(1));
    CHECK(v == doctest::Approx(t * t / 2).epsilon(1e-15));
    CHECK(std::log(std::cosh(t)) <= v);
    double w = bs.phi(h, Vec::Ones(1));
    CHECK(w == doctest::Approx(t + t * t / 2).epsilon(1e-15));
    CHECK(w >= t);
  }
  CHECK(bs.phi(Vec::Zero(1), Vec::Ones(1)) == 0.0);
  Vec lo(1), hi(1);
  lo << -1;
  hi << INFINITY;
  CHECK_THROWS_AS(bounded_support_family(box(lo, hi), x), CapabilityError);
  CHECK_THROWS_AS(bounded_support_family(x, box(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0))),
                  InvalidArgument);
}

TEST_CASE("bound inequality behind the bounded-support family") {
  // beta*eta + eta^2/2 - ln(cosh eta + beta sinh eta) >= 0 on the full grid
  double worst = INFINITY;
  long count = 0;
  for (int e = -3000; e <= 1000; ++e) {
    double eta = std::pow(10.0, e / 1000.0);
    for (int b = -100; b <= 100; ++b) {
      double beta = b / 100.0;
      // ln(cosh + beta sinh) = eta + ln((1 + beta) + (1 - beta) e^{-2 eta}) - ln 2
      double lg = eta + std::log((1.0 + beta) + (1.0 - beta) * std::exp(-2.0 * eta)) - std::log(2.0);
      worst = std::min(worst, beta * eta + 0.5 * eta * eta - lg);
      ++count;
    }
  }
  CHECK(count > 200000);
  CHECK(worst >= -1e-12);
}

TEST_CASE("convexity and concavity of every basic family") {
  CounterRng rng(10);
  Mat lo = 0.5 * Mat::Identity(3, 3), hi = 2.0 * Mat::Identity(3, 3);
  auto sg = sub_gaussian_family(box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0)),
                                std::make_shared<PsdInterval>(lo, hi));
  midpoint_suite(sg, [](CounterRng& r) { return randn(r, 3, 2.0); });
  auto po = poisson_family(box(Vec::Constant(3, 0.1), Vec::Constant(3, 5.0)));
  midpoint_suite(po, [](CounterRng& r) { return randn(r, 3, 1.5); });
  auto di = discrete_family(std::make_shared<Simplex>(4));
  midpoint_suite(di, [](CounterRng& r) { return randn(r, 4, 3.0); });
  auto xb = ball(Vec::Zero(2), 1.5);
  auto bs = bounded_support_family(xb, ball(Vec::Zero(2), 1.0));
  midpoint_suite(bs, [](CounterRng& r) { return randn(r, 2, 2.0); });
}

TEST_CASE("direct sum matches block sub-Gaussian data") {
  CounterRng rng(11);
  Vec t1 = randn(rng, 2), t2 = randn(rng, 3);
  Mat c1 = rand_spd(rng, 2), c2 = rand_spd(rng, 3);
  auto ds = direct_sum({gaussian_singleton(t1, c1), gaussian_singleton(t2, c2)});
  Vec t(5);
  t << t1, t2;
  Mat c = Mat::Zero(5, 5);
  c.topLeftCorner(2, 2) = c1;
  c.bottomRightCorner(3, 3) = c2;
  auto block = gaussian_singleton(t, c);
  Vec mu(2 + 4 + 3 + 9);
  mu << sub_gaussian_param(t1, c1), sub_gaussian_param(t2, c2);
  Vec mub = sub_gaussian_param(t, c);
  for (int k = 0; k < 50; ++k) {
    Vec h = randn(rng, 5, 2.0);
    CHECK(std::abs(ds.phi(h, mu) - block.phi(h, mub)) <= 1e-12 * std::max(1.0, std::abs(block.phi(h, mub))));
  }
  auto single = direct_sum({block});
  Vec h = randn(rng, 5);
  CHECK(single.phi(h, mub) == block.phi(h, mub));
  CHECK_THROWS_AS(direct_sum({}), InvalidArgument);
  gradient_check(ds, randn(rng, 5), mu);
}

TEST_CASE("iid scaling identities") {
  CounterRng rng(12);
  Vec th = randn(rng, 3);
  Mat cv = rand_spd(rng, 3);
  auto g = gaussian_singleton(th, cv);
  Vec mu = sub_gaussian_param(th, cv);
  auto one = iid_scale(g, {1.0});
  auto five = iid_scale(g, {1, 1, 1, 1, 1});
  const double a = 0.7, b = -1.3;
  auto ab = iid_scale(g, {a, b});
  for (int k = 0; k < 50; ++k) {
    Vec h = randn(rng, 3, 2.0);
    double base = g.phi(h, mu);
    CHECK(std::abs(one.phi(h, mu) - base) <= 1e-12 * std::max(1.0, std::abs(base)));
    CHECK(std::abs(five.phi(h, mu) - 5 * base) <= 1e-12 * std::max(1.0, std::abs(5 * base)));
    double ref = (a + b) * th.dot(h) + 0.5 * (a * a + b * b) * h.dot(cv * h);
    CHECK(std::abs(ab.phi(h, mu) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
  CHECK_THROWS_AS(iid_scale(g, {}), InvalidArgument);
  // bounded H gets shrunk by the largest weight
  auto restricted = RegularData(ball(Vec::Zero(3), 2.0), g.M_ptr(), g.oracle(), FamilyKind::custom);
  auto sc = iid_scale(restricted, {0.5, 4.0});
  CHECK(sc.H().contains(Vec::Unit(3, 0) * 0.49));
  CHECK_FALSE(sc.H().contains(Vec::Unit(3, 0) * 0.6));
}

TEST_CASE("affine image of sub-Gaussian data") {
  CounterRng rng(13);
  Vec th = randn(rng, 3);
  Mat cv = rand_spd(rng, 3);
  auto g = gaussian_singleton(th, cv);
  Vec mu = sub_gaussian_param(th, cv);
  Mat a = Mat::Random(2, 3);
  Vec s = randn(rng, 2);
  auto img = affine_image(g, a, s);
  auto ref = gaussian_singleton(a * th + s, a * cv * a.transpose());
  Vec muref = sub_gaussian_param(a * th + s, a * cv * a.transpose());
  for (int k = 0; k < 50; ++k) {
    Vec h = randn(rng, 2, 2.0);
    double r = ref.phi(h, muref);
    CHECK(std::abs(img.phi(h, mu) - r) <= 1e-12 * std::max(1.0, std::abs(r)));
  }
  CHECK(img.phi(Vec::Zero(2), mu) == 0.0);
  auto id = affine_image(g, Mat::Identity(3, 3), Vec::Zero(3));
  Vec h = randn(rng, 3);
  CHECK(id.phi(h, mu) == doctest::Approx(g.phi(h, mu)).epsilon(1e-15));
  CHECK_THROWS_AS(affine_image(g, Mat::Identity(2, 2), Vec::Zero(2)), InvalidArgument);
  gradient_check(img, randn(rng, 2), mu);
}

TEST_CASE("semi-direct sum") {
  CounterRng rng(14);
  Mat cv = rand_spd(rng, 2);
  auto part = sub_gaussian_family(singleton(sub_gaussian_param(Vec::Zero(2), cv)));
  Vec mu1 = sub_gaussian_param(Vec::Zero(2), cv);
  Vec mu(2 * mu1.size());
  mu << mu1, mu1;

  SUBCASE("single part equals the part") {
    auto s1 = semi_direct_sum({part});
    Vec h = randn(rng, 2);
    CHECK(s1.phi(h, mu1) == doctest::Approx(part.phi(h, mu1)).epsilon(1e-14));
  }
  SUBCASE("symmetric pair") {
    auto s2 = semi_direct_sum({part, part});
    Vec g = randn(rng, 2);
    Vec h(4);
    h << g, g;
    CHECK(s2.phi(h, mu) == doctest::Approx(2.0 * g.dot(cv * g)).epsilon(1e-9));
    Vec w = semi_direct_weights(s2, h, mu);
    CHECK(w(0) == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("inner optimum vs grid, L = 2 and 3") {
    Vec th = randn(rng, 2);
    Mat c2 = rand_spd(rng, 2);
    auto other = poisson_family(box(Vec::Constant(2, 0.5), Vec::Constant(2, 2.0)));
    auto p3 = gaussian_singleton(th, c2);
    std::vector<RegularData> parts{part, other, p3};
    Vec m3(mu1.size() + 2 + mu1.size());
    m3 << mu1, Vec::Constant(2, 1.2), sub_gaussian_param(th, c2);
    for (int L : {2, 3}) {
      std::vector<RegularData> ps(parts.begin(), parts.begin() + L);
      double eps = 1e-3;
      auto sd = semi_direct_sum(ps, eps);
      Vec mu_l = m3.head(sd.param_dim());
      for (int trial = 0; trial < 5; ++trial) {
        Vec h = randn(rng, sd.obs_dim(), 1.0);
        double val = sd.phi(h, mu_l);
        auto f = [&](const Vec& lam) {
          double s = 0.0;
          Eigen::Index oh = 0, om = 0;
          for (int l = 0; l < L; ++l) {
            Eigen::Index nh = ps[l].obs_dim(), nm = ps[l].param_dim();
            s += lam(l) * ps[l].phi(h.segment(oh, nh) / lam(l), mu_l.segment(om, nm));
            oh += nh;
            om += nm;
          }
          return s;
        };
        double best = INFINITY;
        const int n = (L == 2) ? 20000 : 600;
        for (int i = 0; i <= n; ++i) {
          if (L == 2) {
            double l0 = eps + (1 - 2 * eps) * i / n;
            Vec lam(2);
            lam << l0, 1 - l0;
            best = std::min(best, f(lam));
          } else {
            for (int j = 0; i + j <= n; ++j) {
              double l0 = eps + (1 - 3 * eps) * i / n, l1 = eps + (1 - 3 * eps) * j / n;
              Vec lam(3);
              lam << l0, l1, 1 - l0 - l1;
              best = std::min(best, f(lam));
            }
          }
        }
        CHECK(val <= best + 1e-9);
        CHECK(val >= best - 1e-4 * std::max(1.0, std::abs(best)));
        // uniform weights give an upper bound
        CHECK(val <= f(Vec::Constant(L, 1.0 / L)) + 1e-12);
      }
      midpoint_suite(sd, [&](CounterRng& r) { return randn(r, sd.obs_dim(), 1.0); }, 200, 1e-8);
    }
  }
  SUBCASE("non-smooth parts") {
    auto x = box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
    auto bs = bounded_support_family(x, ball(Vec::Zero(2), 0.5));
    auto sd = semi_direct_sum({bs, bs}, 1e-3);
    Vec m(4);
    m << 0.2, -0.1, 0.3, 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Vec h = randn(rng, 4, 1.5);
      double best = INFINITY;
      for (int i = 0; i <= 20000; ++i) {
        double l0 = 1e-3 + (1 - 2e-3) * i / 20000.0;
        best = std::min(best, l0 * bs.phi(h.head(2) / l0, m.head(2)) +
                                  (1 - l0) * bs.phi(h.tail(2) / (1 - l0), m.tail(2)));
      }
      double val = sd.phi(h, m);
      CHECK(val <= best + 1e-9);
      CHECK(val >= best - 1e-4 * std::max(1.0, std::abs(best)));
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(semi_direct_sum({part, part}, 0.5), InvalidArgument);
    auto unbounded = sub_gaussian_family(
        product({whole_space(2), singleton(vec(cv))}));
    CHECK_THROWS_AS(semi_direct_sum({part, unbounded}), InvalidArgument);
    auto restricted = RegularData(ball(Vec::Zero(2), 1.0), part.M_ptr(), part.oracle(), FamilyKind::custom);
    CHECK_THROWS_AS(semi_direct_sum({part, restricted}), InvalidArgument);
  }
}

TEST_CASE("support refinement") {
  CounterRng rng(15);
  auto x = box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  auto bs = bounded_support_family(x, ball(Vec::Zero(2), 0.5));
  SUBCASE("G = {0} leaves Phi unchanged") {
    auto r = refine_with_support(bs, x, singleton(Vec::Zero(2)));
    for (int k = 0; k < 20; ++k) {
      Vec h = randn(rng, 2, 2.0), mu = bs.M().project(randn(rng, 2));
      CHECK(r.phi(h, mu) == doctest::Approx(bs.phi(h, mu)).epsilon(1e-14));
    }
  }
  SUBCASE("bounded-support illustration") {
    auto g = ball(Vec::Zero(2), 3.0);
    auto r = refine_with_support(bs, x, g);
    for (int k = 0; k < 200; ++k) {
      Vec h = randn(rng, 2, 2.0), mu = bs.M().project(randn(rng, 2));
      double v = r.phi(h, mu);
      CHECK(v <= bs.phi(h, mu) + 1e-12);
      if (g->contains(h)) CHECK(v <= x->support(h) + 1e-12);
      Vec sh = refine_shift(r, h, mu);
      CHECK(g->contains(sh, 1e-9));
    }
    midpoint_suite(r, [](CounterRng& q) { return randn(q, 2, 2.0); }, 1000, 1e-10);
  }
  SUBCASE("sub-Gaussian data refined by a box support") {
    Mat cv = Mat::Identity(2, 2);
    auto sg = sub_gaussian_family(box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5)),
                                  singleton(vec(cv)));
    auto r = refine_with_support(sg, x, ball(Vec::Zero(2), 10.0));
    for (int k = 0; k < 100; ++k) {
      Vec h = randn(rng, 2, 4.0);
      Vec mu = sg.M().project(randn(rng, sg.param_dim()));
      double v = r.phi(h, mu);
      CHECK(v <= sg.phi(h, mu) + 1e-12);
      if (h.norm() <= 10.0) CHECK(v <= x->support(h) + 1e-12);
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(refine_with_support(bs, x, ball(Vec::Constant(2, 5.0), 1.0)), InvalidArgument);
    Vec lo(2), hi(2);
    lo << -1, -INFINITY;
    hi << 1, 1;
    CHECK_THROWS_AS(refine_with_support(bs, box(lo, hi), ball(Vec::Zero(2), 1.0)), CapabilityError);
  }
}

TEST_CASE("hypothesis kind tags") {
  for (auto k : {HypothesisKind::R, HypothesisKind::S, HypothesisKind::R_stationary,
                 HypothesisKind::S_stationary})
    CHECK(hypothesis_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(hypothesis_kind_from_string("T"), InvalidArgument);
}
