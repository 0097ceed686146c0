#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "reifenberg/rigid_motion.hpp"

using namespace reifenberg::rigid;

namespace {

std::vector<Vec> grid_samples_2d(double extent, int k) {
  std::vector<Vec> out;
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j) {
      Vec v(2);
      v << extent * i / k, extent * j / k;
      out.push_back(v);
    }
  return out;
}

RigidMotion random_motion(int n, std::mt19937_64& rng, bool allow_reflection) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  if (!allow_reflection && Q.determinant() < 0) Q.col(0) = -Q.col(0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return {Q, v};
}

}  // namespace

TEST_CASE("group operations are exact") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + (trial % 2);
    const RigidMotion a = random_motion(n, rng, true);
    const RigidMotion b = random_motion(n, rng, true);
    CHECK(a.orthonormal());

    const RigidMotion ab = compose(a, b);
    const RigidMotion ainv = invert(a);
    const RigidMotion id = compose(a, ainv);
    CHECK((id.Q - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(id.v.norm() <= 1e-12 * (1.0 + a.v.norm()));

    // pointwise composition oracle on random points
    std::normal_distribution<double> g(0.0, 1.0);
    for (int p = 0; p < 100; ++p) {
      Vec x(n);
      for (int k = 0; k < n; ++k) x(k) = g(rng);
      CHECK((ab.apply(x) - a.apply(b.apply(x))).norm() <= 1e-12 * (1 + x.norm()));
    }
  }
  // two translations compose to the sum
  Vec u(2), w(2);
  u << 1, 2;
  w << -3, 5;
  const RigidMotion tu = RigidMotion::translation(u);
  const RigidMotion tw = RigidMotion::translation(w);
  CHECK((compose(tu, tw).v - (u + w)).norm() == 0.0);
}

TEST_CASE("fit recovers an exact rigid motion") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidMotion truth = random_motion(2, rng, trial % 2 == 1);
    const auto pts = grid_samples_2d(1.0, 2);
    std::vector<Vec> imgs;
    for (const auto& p : pts) imgs.push_back(truth.apply(p));
    const auto fit = fit_isometry(pts, imgs, 0, 1.0);
    CHECK(fit.residual <= 1e-10);
    CHECK(!fit.degenerate);
    // anchor maps exactly
    CHECK((fit.motion.apply(pts[0]) - imgs[0]).norm() == 0.0);
  }
}

TEST_CASE("fit residual tracks the brute-force oracle on noisy isometries") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0.0, 1.0);
  const double t = 1.0, delta = 1e-2;
  const auto pts = grid_samples_2d(t, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidMotion truth = random_motion(2, rng, false);
    std::vector<Vec> imgs;
    // smooth bounded perturbation field keeps the delta-isometry property
    Vec c1(2), c2(2);
    c1 << g(rng), g(rng);
    c2 << g(rng), g(rng);
    for (const auto& p : pts) {
      Vec noise(2);
      noise << std::sin(p.dot(c1)), std::cos(p.dot(c2));
      imgs.push_back(truth.apply(p) + 0.25 * delta * t * noise);
    }
    const auto fit = fit_isometry(pts, imgs, 0, t);
    const double oracle = oracles::brute_force_isometry_2d(pts, imgs, 0, 1e-4);
    CHECK(fit.residual <= 1.05 * oracle + 1e-12);
    CHECK(fit.residual <= 4.0 * delta * t);  // measured kappa, well below C(n)
  }
}

TEST_CASE("fit is equivariant under rigid conjugation") {
  std::mt19937_64 rng(5);
  const auto pts = grid_samples_2d(1.0, 2);
  const RigidMotion truth = random_motion(2, rng, false);
  std::vector<Vec> imgs;
  for (const auto& p : pts) imgs.push_back(truth.apply(p));
  // nudge the images a bit so the fit is not trivially exact
  for (std::size_t k = 0; k < imgs.size(); ++k)
    imgs[k](0) += 1e-3 * std::sin(double(k));

  const auto base = fit_isometry(pts, imgs, 0, 1.0);
  const RigidMotion pre = random_motion(2, rng, false);
  const RigidMotion post = random_motion(2, rng, false);
  std::vector<Vec> pts2, imgs2;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    pts2.push_back(invert(pre).apply(pts[k]));
    imgs2.push_back(post.apply(imgs[k]));
  }
  const auto conj = fit_isometry(pts2, imgs2, 0, 1.0);
  const RigidMotion expected = compose(post, compose(base.motion, pre));
  CHECK((conj.motion.Q - expected.Q).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((conj.motion.v - expected.v).norm() <= 1e-10);
  CHECK(conj.residual == doctest::Approx(base.residual).epsilon(1e-9));
}

TEST_CASE("matrix gap") {
  std::vector<Vec> ball;
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j) {
      Vec v(2);
      v << i / 4.0, j / 4.0;
      if (v.norm() <= 1.0) ball.push_back(v);
    }

  SUBCASE("identity") {
    CHECK(matrix_gap(RigidMotion::identity(2), ball, 1.0, 1e-12) == 0.0);
  }
  SUBCASE("small rotation: gap equals 2 sin(theta/2)") {
    const double theta = 1e-3;
    const RigidMotion rot = RigidMotion::rotation2(theta);
    double eps = 0.0;
    for (const auto& x : ball) eps = std::max(eps, (rot.apply(x) - x).norm());
    const double gap = matrix_gap(rot, ball, 1.0, eps);
    CHECK(gap == doctest::Approx(2.0 * std::sin(theta / 2)).epsilon(1e-9));
    CHECK(gap <= 4.0 * eps);
  }
  SUBCASE("translation has zero gap") {
    Vec u(2);
    u << 0.3, 0.0;
    CHECK(matrix_gap(RigidMotion::translation(u), ball, 1.0, 0.3) == 0.0);
  }
  SUBCASE("precondition violation throws") {
    const RigidMotion rot = RigidMotion::rotation2(0.5);
    CHECK_THROWS_AS(matrix_gap(rot, ball, 1.0, 1e-6), ContractViolation);
  }
}

TEST_CASE("matrix gap property over random motions") {
  std::mt19937_64 rng(17);
  std::vector<Vec> ball;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) {
      Vec v(2);
      v << i / 3.0, j / 3.0;
      if (v.norm() <= 1.0) ball.push_back(v);
    }
  int tested = 0;
  for (int trial = 0; trial < 200; ++trial) {
    RigidMotion m = random_motion(2, rng, false);
    m.v *= 0.05;
    // pull the rotation toward the identity to keep sup|F-id| moderate
    const double th = 0.2 * std::atan2(m.Q(1, 0), m.Q(0, 0));
    m.Q = RigidMotion::rotation2(th).Q;
    double eps = 0.0;
    for (const auto& x : ball) eps = std::max(eps, (m.apply(x) - x).norm());
    if (eps == 0.0) continue;
    ++tested;
    CHECK(matrix_gap(m, ball, 1.0, eps) <= 4.0 * eps * (1 + 1e-9));
  }
  CHECK(tested >= 150);
}
