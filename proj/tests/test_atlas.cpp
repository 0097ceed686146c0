#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "reifenberg/atlas.hpp"
#include "reifenberg/io.hpp"

using namespace reifenberg;
using atlas::GluingAtlas;
using atlas::ManifoldPoint;

namespace {

const GluingAtlas& disk_atlas() {
  static auto space = fixtures::disk_grid(16.0, 1.0);
  static auto prof = gh::flatness_profile(space, 16.0, 2, 1);
  static const GluingAtlas A = [] {
    atlas::BuildConfig cfg;
    cfg.check_grid = 8;
    cfg.random_probes = 200;
    return atlas::build_atlas(space, prof, 0, cfg);
  }();
  return A;
}

const GluingAtlas& torus_atlas() {
  static auto space = fixtures::flat_torus(120.0, 60);  // Omega window 2.4
  static auto prof = gh::flatness_profile(space, 30.0, 2, 1);
  static const GluingAtlas A = [] {
    atlas::BuildConfig cfg;
    cfg.check_grid = 8;
    cfg.random_probes = 200;
    return atlas::build_atlas(space, prof, 0, cfg);
  }();
  return A;
}

// denser disk whose spacing (6.25t) leaves room for three-chart chains
const GluingAtlas& dense_disk_atlas() {
  static auto space = fixtures::disk_grid(8.0, 0.5);
  static auto prof = gh::flatness_profile(space, 16.0, 2, 0);
  static const GluingAtlas A = [] {
    atlas::BuildConfig cfg;
    cfg.check_grid = 6;
    cfg.random_probes = 100;
    return atlas::build_atlas(space, prof, 0, cfg);
  }();
  return A;
}

}  // namespace

TEST_CASE("flat disk atlas: exact rigid transitions, no-op modification") {
  const auto& A = disk_atlas();
  CHECK(A.connected);
  CHECK(A.chart_count() == A.space->size());  // sub-resolved net = sample
  CHECK(A.eps_fit <= 1e-9);
  CHECK(A.beta_defect <= 1e-9);
  CHECK(A.transitions.max_c2_change <= 1e-9);
  CHECK(A.cocyclicity <= 1e-9 * A.t);
  CHECK(A.sigma <= 1e-9);
  for (const auto& [key, st] : A.transitions.maps) CHECK(st.map.is_rigid());
  // coverage: canonical points sit well inside the 2t ball
  CHECK(A.coverage_defect <= 2.0 * A.t);
  // f is near-identity on the sample
  for (std::size_t z = 0; z < A.space->size(); z += 7) {
    const std::size_t img = A.eval_f(A.canonical[z]);
    CHECK(A.space->dist(img, z) <= 2.0 * A.t);
  }
}

TEST_CASE("flat torus atlas: connected, exact, cocyclical") {
  const auto& A = torus_atlas();
  CHECK(A.connected);
  CHECK(A.eps_fit <= 1e-6);
  CHECK(A.cocyclicity <= 1e-9 * A.t);
  for (const auto& [key, st] : A.transitions.maps) CHECK(st.map.is_rigid());
}

TEST_CASE("transitions behave as chart changes") {
  const auto& A = torus_atlas();
  const auto it = A.transitions.maps.begin();
  const std::size_t a = it->second.from, b = it->second.to;

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  for (int probe = 0; probe < 200 && checked < 50; ++probe) {
    Eigen::VectorXd x(2);
    x << 4.0 * A.t * g(rng), 4.0 * A.t * g(rng);
    if (!A.in_domain(b, a, x)) continue;
    ++checked;
    ManifoldPoint p{a, x};
    const ManifoldPoint q = A.apply_transition(p, b);
    CHECK(q.chart == b);
    const ManifoldPoint back = A.apply_transition(q, a);
    CHECK((back.coords - x).norm() <= 1e-10 * A.t);
    const ManifoldPoint same = A.apply_transition(p, a);
    CHECK((same.coords - x).norm() == 0.0);
  }
  CHECK(checked > 0);
}

TEST_CASE("three-chart chains agree with direct transitions") {
  const auto& A = dense_disk_atlas();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  for (std::size_t j1 = 0; j1 < A.chart_count() && checked < 40; j1 += 17) {
    for (std::size_t j2 : A.neighbors[j1]) {
      for (std::size_t j3 : A.neighbors[j2]) {
        if (j3 == j1 || !A.has_transition(j3, j1)) continue;
        for (int probe = 0; probe < 5; ++probe) {
          Eigen::VectorXd x(2);
          x << 3.0 * A.t * g(rng), 3.0 * A.t * g(rng);
          if (!A.in_domain(j2, j1, x)) continue;
          const Eigen::VectorXd y = A.transition(j2, j1).eval(x);
          if (!A.in_domain(j3, j2, y)) continue;
          if (!A.in_domain(j3, j1, x)) continue;
          const Eigen::VectorXd direct = A.transition(j3, j1).eval(x);
          const Eigen::VectorXd chained = A.transition(j3, j2).eval(y);
          CHECK((direct - chained).norm() <= 1e-9 * A.t);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("locate and eval_f invert each other up to chart resolution") {
  const auto& A = disk_atlas();
  for (std::size_t z = 0; z < A.space->size(); z += 13) {
    const ManifoldPoint w = A.locate(z);
    CHECK(w.coords.norm() <= 6.0 * A.t);
    const std::size_t img = A.eval_f(w);
    CHECK(A.space->dist(img, z) <= 2.0 * A.t);
  }
}

TEST_CASE("pseudo distance branches") {
  const auto& A = torus_atlas();
  const ManifoldPoint p = A.canonical[10];
  CHECK(A.pseudo_distance(p, p) == 0.0);

  const ManifoldPoint q = A.canonical[A.space->size() / 2];
  const double rho = A.pseudo_distance(p, q);
  const double df = A.space->dist(A.eval_f(p), A.eval_f(q));
  CHECK(rho == doctest::Approx(df));

  ManifoldPoint a{p.chart, Eigen::VectorXd::Zero(2)};
  Eigen::VectorXd small(2);
  small << 0.5 * A.t, 0.0;
  ManifoldPoint b{p.chart, small};
  const double rho2 = A.pseudo_distance(a, b);
  CHECK(rho2 == doctest::Approx(0.5 * A.t).epsilon(1e-6));
}

TEST_CASE("intrinsic distance on a glued circle atlas") {
  auto circle = fixtures::circle_intrinsic(240.0, 480);  // spacing 0.5
  auto prof = gh::flatness_profile(circle, 60.0, 1, 1);
  atlas::BuildConfig cfg;
  cfg.check_grid = 8;
  cfg.random_probes = 100;
  const auto A = atlas::build_atlas(circle, prof, 0, cfg);
  CHECK(A.connected);

  const auto r =
      atlas::intrinsic_distance(A, A.canonical[0], A.canonical[240]);
  CHECK(r.connected);
  CHECK(r.value == doctest::Approx(120.0).epsilon(0.02));

  const auto near =
      atlas::intrinsic_distance(A, A.canonical[0], A.canonical[1]);
  CHECK(near.value == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("two overlapping balls glue into a connected atlas") {
  // union of two unit disks with centers 2(1-eps) apart; the glued space is
  // connected through the lens and every interior ball stays Euclidean
  const double eps = 0.05;
  const double off = 1.0 - eps;
  std::vector<Eigen::Vector2d> pts;
  const double h = 0.125;
  for (int i = -18; i <= 18; ++i)
    for (int j = -9; j <= 9; ++j) {
      Eigen::Vector2d p(i * h, j * h);
      if ((p - Eigen::Vector2d(off, 0)).norm() <= 1.0 ||
          (p + Eigen::Vector2d(off, 0)).norm() <= 1.0)
        pts.push_back(p);
    }
  Eigen::MatrixXd coords(pts.size(), 2);
  std::vector<std::string> ids(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    coords.row(i) = pts[i];
    ids[i] = std::to_string(i);
  }
  core::FiniteMetricSpace space(std::move(ids), std::move(coords), true);
  const double r = 4.0;  // t = 0.02, Omega window 0.32 > spacing 0.125
  auto prof = gh::flatness_profile(space, r, 2, 0);
  atlas::BuildConfig cfg;
  cfg.check_grid = 6;
  cfg.random_probes = 100;
  const auto A = atlas::build_atlas(space, prof, 0, cfg);
  CHECK(A.connected);
}

TEST_CASE("atlas json round trip reproduces transitions") {
  const auto& A = torus_atlas();
  const auto j = io::atlas_to_json(A);
  const auto B = io::atlas_from_json(j, *A.space);
  CHECK(B.chart_count() == A.chart_count());
  CHECK(B.anchor_class == A.anchor_class);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& [key, st] : A.transitions.maps) {
    const auto& stB = B.transitions.maps.at(key);
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::VectorXd x(2);
      x << 5.0 * A.t * g(rng), 5.0 * A.t * g(rng);
      CHECK((st.map.eval(x) - stB.map.eval(x)).norm() <= 1e-12 * A.t);
    }
  }
}
