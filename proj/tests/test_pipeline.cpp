#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "reifenberg/pipeline.hpp"

using namespace reifenberg;

namespace {

const core::FiniteMetricSpace& torus_space() {
  static auto space = fixtures::flat_torus(120.0, 60);
  return space;
}

pipeline::TowerConfig small_cfg() {
  pipeline::TowerConfig cfg;
  cfg.grid = 7;
  cfg.probe_pairs = 1500;
  cfg.build.check_grid = 8;
  cfg.build.random_probes = 150;
  return cfg;
}

}  // namespace

TEST_CASE("trivial tower: depth equals start") {
  auto disk = fixtures::disk_grid(16.0, 1.0);
  const auto tower = pipeline::run_tower(disk, 16.0, 2, 0, 0, small_cfg());
  CHECK(tower.atlases.size() == 1);
  CHECK(tower.maps.empty());
  CHECK(tower.increments.empty());
  const auto rep = pipeline::certify(tower, small_cfg());
  CHECK(rep.pass);
  const auto* ratio = rep.find("f-global-ratio");
  REQUIRE(ratio);
  CHECK(ratio->value <= 1e-4);
  CHECK(rep.surjectivity_defect <= 2.0 * tower.at(0).t);
}

TEST_CASE("torus tower with one refinement step certifies") {
  const auto tower = pipeline::run_tower(torus_space(), 30.0, 2, 0, 1, small_cfg());
  REQUIRE(tower.atlases.size() == 2);
  CHECK(tower.at(0).connected);
  const auto rep = pipeline::certify(tower, small_cfg());
  for (const auto& c : rep.criteria) {
    INFO(c.name, " value=", c.value, " threshold=", c.threshold, " ", c.witness);
    CHECK(c.pass);
  }
  CHECK(rep.pass);

  // raising m strictly shrinks the product tail
  CHECK(tower.tail_product(1) < tower.tail_product(0));
}

TEST_CASE("fault injection is caught with a witness") {
  auto tower = pipeline::run_tower(torus_space(), 30.0, 2, 0, 0, small_cfg());
  // corrupt one transition by 0.3 t
  auto& st = tower.atlases[0].transitions.maps.begin()->second;
  Eigen::VectorXd shift(2);
  shift << 0.3 * tower.at(0).t, 0.0;
  st.map = smooth::SmoothMap::compose(
      smooth::SmoothMap::rigid(rigid::RigidMotion::translation(shift)),
      st.map);
  const auto rep = pipeline::certify(tower, small_cfg());
  CHECK(!rep.pass);
  const auto* cocy = rep.find("transition-cocyclicity");
  REQUIRE(cocy);
  CHECK(!cocy->pass);
  CHECK(!cocy->witness.empty());
}

TEST_CASE("shared atlas transport between two circle samples") {
  auto s1 = fixtures::circle_jittered(240.0, 480, 0.2, 1);
  auto s2 = fixtures::circle_jittered(240.0, 480, 0.2, 2);
  // nearest-point correspondences (index-aligned samples are near each other)
  std::vector<std::size_t> fwd(s1.size()), bwd(s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) fwd[i] = i;
  for (std::size_t i = 0; i < s2.size(); ++i) bwd[i] = i;
  const double delta = 0.4;  // jitter-scale mismatch

  auto res = pipeline::shared_atlas(s1, s2, fwd, bwd, delta, 60.0, 1, small_cfg());
  INFO("failed_check=", res.failed_check);
  REQUIRE(res.admissible);
  CHECK(res.identical_structure);
  CHECK(res.identical_maps);
  CHECK(res.atlas1.chart_count() == res.atlas2.chart_count());

  // an oversized delta must fail a named check
  auto bad = pipeline::shared_atlas(s1, s2, fwd, bwd, 1e-9, 60.0, 1, small_cfg());
  CHECK(!bad.admissible);
  CHECK(!bad.failed_check.empty());
}
