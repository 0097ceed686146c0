#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "reifenberg/smooth_map.hpp"

using namespace reifenberg;
using smooth::Bump;
using smooth::Region;
using smooth::SmoothMap;
using Vec = smooth::Vec;
using Mat = smooth::Mat;

namespace {

SmoothMap sin_field(double eps, double t) {
  // f(x) = x + eps t sin(x1/t) e1
  return SmoothMap::callable(
      2,
      [eps, t](const Vec& x) {
        Vec y = x;
        y(0) += eps * t * std::sin(x(0) / t);
        return y;
      },
      [eps, t](const Vec& x) {
        Mat j = Mat::Identity(2, 2);
        j(0, 0) += eps * std::cos(x(0) / t);
        return j;
      });
}

rigid::RigidMotion random_motion(int n, std::mt19937_64& rng, double vscale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = vscale * g(rng);
  return {Q, v};
}

// near-identity smooth perturbation of a rigid motion, as a blend
SmoothMap perturbed_rigid(const rigid::RigidMotion& base, double eps, double t,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec dir(base.dim());
  for (int i = 0; i < base.dim(); ++i) dir(i) = g(rng);
  dir.normalize();
  SmoothMap shift =
      SmoothMap::rigid(rigid::RigidMotion::translation(dir * (eps * t)));
  SmoothMap hat = SmoothMap::blended(
      shift, {Bump{Vec::Zero(base.dim()), 4.0 * t, 8.0 * t}});
  return SmoothMap::compose(hat, SmoothMap::rigid(base));
}

}  // namespace

TEST_CASE("ck_norm closed forms") {
  const double t = 0.7;
  const Region ball = Region::ball(Vec::Zero(2), 5.0 * t);
  const SmoothMap id = SmoothMap::identity(2);

  SUBCASE("f = ref gives zero") {
    const auto rep = ck_norm(id, id, ball, t, 2, 9);
    CHECK(rep.value == 0.0);
  }
  SUBCASE("constant field: value term only") {
    Vec u(2);
    u << 0.3 * t, 0.0;
    const SmoothMap f = SmoothMap::rigid(rigid::RigidMotion::translation(u));
    const auto rep = ck_norm(f, id, ball, t, 2, 9);
    CHECK(rep.value == doctest::Approx(0.3));
    CHECK(rep.term_jac <= 1e-14);
    CHECK(rep.term_hess <= 1e-9);
  }
  SUBCASE("sine field: all three terms equal eps") {
    const double eps = 0.05;
    const auto rep = ck_norm(sin_field(eps, t), id, ball, t, 2, 33);
    CHECK(rep.term_value == doctest::Approx(eps).epsilon(0.02));
    CHECK(rep.term_jac == doctest::Approx(eps).epsilon(0.02));
    CHECK(rep.term_hess == doctest::Approx(eps).epsilon(0.02));
    CHECK(rep.value == doctest::Approx(eps).epsilon(0.02));
  }
}

TEST_CASE("ck_norm is scaling invariant") {
  const double eps = 0.07;
  const Region unit = Region::ball(Vec::Zero(2), 4.0);
  const auto rep1 =
      ck_norm(sin_field(eps, 1.0), SmoothMap::identity(2), unit, 1.0, 2, 17);
  for (double t : {0.2, 5.0}) {
    const Region ball = Region::ball(Vec::Zero(2), 4.0 * t);
    const auto rep =
        ck_norm(sin_field(eps, t), SmoothMap::identity(2), ball, t, 2, 17);
    CHECK(rep.value == doctest::Approx(rep1.value).epsilon(1e-9));
  }
}

TEST_CASE("jacobians match finite differences on every node type") {
  std::mt19937_64 rng(31);
  const double t = 1.0;
  std::normal_distribution<double> g(0.0, 1.0);

  std::vector<SmoothMap> maps;
  maps.push_back(SmoothMap::rigid(random_motion(2, rng, 0.5)));
  maps.push_back(perturbed_rigid(random_motion(2, rng, 0.5), 0.05, t, rng));
  maps.push_back(SmoothMap::compose(maps[1], maps[0]));
  maps.push_back(SmoothMap::inverse(
      maps[1], rigid::invert(maps[1].rigid_reference()), 0.1));
  maps.push_back(SmoothMap::select(
      {{Region::ball(Vec::Zero(2), 3.0), maps[1]},
       {Region::ball(Vec::Zero(2), 1e9), maps[1]}}));

  for (const auto& f : maps) {
    for (int probe = 0; probe < 25; ++probe) {
      Vec x(2);
      x << 6.0 * g(rng), 6.0 * g(rng);
      const Mat J = f.jacobian(x);
      const double h = 1e-5 * t;
      Mat Jfd(2, 2);
      for (int c = 0; c < 2; ++c) {
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        Jfd.col(c) = (f.eval(xp) - f.eval(xm)) / (2 * h);
      }
      CHECK((J - Jfd).cwiseAbs().maxCoeff() <=
            1e-6 * std::max(1.0, J.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("blend contract") {
  const double t = 1.0;
  const int n = 2;
  const Vec c = Vec::Zero(n);

  SUBCASE("identity blends to identity") {
    const auto br = smooth::blend(SmoothMap::identity(n), c, 2.0, 4.0, t, 2, 9);
    CHECK(br.eps == 0.0);
    CHECK(br.measured.value == 0.0);
    Vec x(2);
    x << 1.0, 2.0;
    CHECK((br.map.eval(x) - x).norm() == 0.0);
  }

  SUBCASE("translation blend: closed-form bump field") {
    const double eps = 0.08;
    Vec u(2);
    u << eps * t, 0.0;
    const SmoothMap H = SmoothMap::rigid(rigid::RigidMotion::translation(u));
    const double R1 = 2.0, R2 = 4.0;
    const auto br = smooth::blend(H, c, R1, R2, t, 1, 9);
    // Hhat(x) = x + eps t phi(x) e1 with the radial quintic
    for (double rho : {0.0, 1.0, 1.99, 2.5, 3.2, 3.9, 4.5, 6.0}) {
      Vec x(2);
      x << 0.0, rho;
      const Bump b{c, R1, R2};
      const Vec expect = x + b.value(x) * u;
      CHECK((br.map.eval(x) - expect).norm() <= 1e-14);
    }
    // measured C1 norm within the documented constant
    CHECK(br.measured.value <= br.bound * (1 + 1e-12));
    CHECK(br.measured.value >= eps);  // value term alone reaches eps
  }

  SUBCASE("interior fixed points are preserved") {
    Vec p(2);
    p << 1.0, 0.5;
    rigid::RigidMotion rot = rigid::RigidMotion::rotation2(0.03);
    rot.v = p - rot.Q * p;
    const auto br = smooth::blend(SmoothMap::rigid(rot), c, 3.0, 5.0, t, 1, 9);
    CHECK((br.map.eval(p) - p).norm() <= 1e-15);
  }

  SUBCASE("oversized deviation refuses") {
    Vec u(2);
    u << 3.0 * t, 0.0;
    const SmoothMap H = SmoothMap::rigid(rigid::RigidMotion::translation(u));
    CHECK_THROWS_AS(smooth::blend(H, c, 3.8, 4.0, t, 1, 9),
                    smooth::BlendRefused);
  }
}

TEST_CASE("inverse maps: rigid shortcut and Newton round trips") {
  std::mt19937_64 rng(47);
  const double t = 1.0;

  SUBCASE("rigid inverse is exact") {
    const auto m = random_motion(2, rng, 1.0);
    const SmoothMap inv =
        SmoothMap::inverse(SmoothMap::rigid(m), rigid::invert(m), 0.0);
    CHECK(inv.is_rigid());
    Vec x(2);
    x << 0.3, -0.7;
    CHECK((inv.eval(m.apply(x)) - x).norm() <= 1e-13);
  }

  SUBCASE("blend inverse round trips at 1e-10 t") {
    const SmoothMap f = perturbed_rigid(random_motion(2, rng, 0.3), 0.1, t, rng);
    const auto inv =
        smooth::invert_map(f, Region::ball(Vec::Zero(2), 8.0), t, 9);
    CHECK(inv.certificate <= 0.5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int probe = 0; probe < 100; ++probe) {
      Vec x(2);
      x << 3.0 * g(rng), 3.0 * g(rng);
      const Vec y = f.eval(x);
      CHECK((f.eval(inv.map.eval(y)) - y).norm() <= 1e-10 * t);
    }
  }

  SUBCASE("inverse of a near-rigid map stays near the inverse rigid") {
    const auto base = random_motion(2, rng, 0.2);
    const SmoothMap f = perturbed_rigid(base, 0.1, t, rng);
    const auto inv =
        smooth::invert_map(f, Region::ball(Vec::Zero(2), 8.0), t, 9);
    const SmoothMap rinv = SmoothMap::rigid(rigid::invert(base));
    const auto rep =
        ck_norm(inv.map, rinv, Region::ball(Vec::Zero(2), 6.0), t, 1, 9);
    const double C = 2.0 * std::sqrt(2.0) + 2.0;  // Lemma-chain constant, n=2
    CHECK(rep.value <= C * 0.1 * (1 + 1e-9));
  }
}

TEST_CASE("composition closeness property") {
  std::mt19937_64 rng(53);
  const double t = 1.0;
  const Region W = Region::ball(Vec::Zero(2), 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto I1 = random_motion(2, rng, 0.4);
    const auto I2 = random_motion(2, rng, 0.4);
    std::uniform_real_distribution<double> u(0.01, 0.1);
    const double d1 = u(rng), d2 = u(rng);
    const SmoothMap f1 = perturbed_rigid(I1, d1, t, rng);
    const SmoothMap f2 = perturbed_rigid(I2, d2, t, rng);
    const SmoothMap comp = SmoothMap::compose(f1, f2);
    const SmoothMap icomp = SmoothMap::rigid(rigid::compose(I1, I2));
    const auto rep = ck_norm(comp, icomp, W, t, 2, 9);
    worst = std::max(worst, rep.value / (d1 + d2));
  }
  // the measured Lemma-chain constant for n=2 at deviations <= 0.1
  CHECK(worst <= 12.0);

  // four-fold version with the iterated constant
  double worst4 = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_real_distribution<double> u(0.01, 0.05);
    std::vector<rigid::RigidMotion> I;
    std::vector<SmoothMap> f;
    std::vector<double> d;
    for (int k = 0; k < 4; ++k) {
      I.push_back(random_motion(2, rng, 0.2));
      d.push_back(u(rng));
      f.push_back(perturbed_rigid(I.back(), d.back(), t, rng));
    }
    SmoothMap comp = f[0];
    rigid::RigidMotion icomp = I[0];
    for (int k = 1; k < 4; ++k) {
      comp = SmoothMap::compose(comp, f[k]);
      icomp = rigid::compose(icomp, I[k]);
    }
    const auto rep = ck_norm(comp, SmoothMap::rigid(icomp), W, t, 2, 9);
    worst4 = std::max(worst4, rep.value / (d[0] + d[1] + d[2] + d[3]));
  }
  CHECK(worst4 <= 20.0);
}

TEST_CASE("conjugation bound") {
  std::mt19937_64 rng(61);
  const double t = 1.0;
  const Region W = Region::ball(Vec::Zero(2), 2.0);

  SUBCASE("g = id gives zero") {
    const SmoothMap f = SmoothMap::rigid(random_motion(2, rng, 0.5));
    const SmoothMap finv =
        SmoothMap::rigid(rigid::invert(f.rigid_reference()));
    const auto rep = smooth::conjugation_bound_check(
        f, finv, SmoothMap::identity(2), W, t, 9);
    CHECK(rep.measured <= 1e-14);
  }

  SUBCASE("rotation conjugating a small translation keeps the norm") {
    const auto rot = rigid::RigidMotion::rotation2(0.7);
    Vec u(2);
    u << 1e-3 * t, 0.0;
    const SmoothMap f = SmoothMap::rigid(rot);
    const SmoothMap finv = SmoothMap::rigid(rigid::invert(rot));
    const SmoothMap g = SmoothMap::rigid(rigid::RigidMotion::translation(u));
    const auto rep = smooth::conjugation_bound_check(f, finv, g, W, t, 9);
    CHECK(rep.measured == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(rep.measured <= rep.bound * (1 + 1e-12));
  }

  SUBCASE("measured conjugate stays below c(n,M) delta") {
    const SmoothMap f = perturbed_rigid(random_motion(2, rng, 0.3), 0.2, t, rng);
    const auto invres =
        smooth::invert_map(f, Region::ball(Vec::Zero(2), 9.0), t, 9);
    std::mt19937_64 rng2(99);
    const SmoothMap g =
        perturbed_rigid(rigid::RigidMotion::identity(2), 1e-3, t, rng2);
    const auto rep =
        smooth::conjugation_bound_check(f, invres.map, g, W, t, 9);
    CHECK(rep.measured <= rep.bound * (1 + 1e-9));
  }
}
