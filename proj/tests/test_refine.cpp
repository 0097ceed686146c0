#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "reifenberg/refine.hpp"

using namespace reifenberg;
using atlas::GluingAtlas;

namespace {

// the glued-circle atlas, dense enough for real chart overlaps
const core::FiniteMetricSpace& circle_space() {
  static auto space = fixtures::circle_intrinsic(240.0, 480);
  return space;
}

const GluingAtlas& circle_atlas() {
  static auto prof = gh::flatness_profile(circle_space(), 60.0, 1, 1);
  static const GluingAtlas A = [] {
    atlas::BuildConfig cfg;
    cfg.check_grid = 8;
    cfg.random_probes = 100;
    return atlas::build_atlas(circle_space(), prof, 0, cfg);
  }();
  return A;
}

// an independently built copy (same scale) serving as the "next" atlas
const GluingAtlas& circle_atlas_fine() {
  static auto prof = gh::flatness_profile(circle_space(), 60.0, 1, 1);
  static const GluingAtlas A = [] {
    atlas::BuildConfig cfg;
    cfg.check_grid = 8;
    cfg.random_probes = 100;
    cfg.seed = 1;
    return atlas::build_atlas(circle_space(), prof, 0, cfg);
  }();
  return A;
}

}  // namespace

TEST_CASE("refinement links on an identity tower are trivial") {
  const auto& A = circle_atlas();
  const auto& B = circle_atlas_fine();
  const auto rc = refine::build_refinement_charts(A, B, 7);
  REQUIRE(rc.links.size() == B.chart_count());
  for (const auto& link : rc.links) {
    // same nets: the parent is the same anchor, K is the identity frame change
    CHECK(B.anchor_point(link.fine_chart) == A.anchor_point(link.parent));
    CHECK(link.residual <= 1e-9 * A.t);
    CHECK(link.inverse_residual <= 1e-9 * A.t);
  }
  CHECK(rc.coverage_radius <= 1.25 * A.t);
  CHECK(rc.phiphi_residual <= 1e-9 * A.t);
}

TEST_CASE("patching with no perturbation keeps every local map") {
  const auto& A = circle_atlas();
  const auto& B = circle_atlas_fine();
  const auto rc = refine::build_refinement_charts(A, B, 7);
  refine::PatchOptions po;
  po.grid = 7;
  const auto pm = refine::patch_immersion(rc, po);
  CHECK(pm.max_h_norm <= 1e-10);
  CHECK(pm.overlap_residual <= 1e-9 * pm.t);

  // h acts as the identity correspondence on the canonical sample
  for (std::size_t z = 0; z < circle_space().size(); z += 7) {
    const auto img = pm.apply(A.canonical[z], B.canonical[z].chart);
    const std::size_t back = B.eval_f(img);
    CHECK(circle_space().dist(back, z) <= 2.0 * A.t);
  }
}

TEST_CASE("patching absorbs an injected eps with a C3 eps correction") {
  const auto& A = circle_atlas();
  const auto& B = circle_atlas_fine();
  const auto rc = refine::build_refinement_charts(A, B, 7);
  refine::PatchOptions po;
  po.grid = 7;
  po.eps_injected = 1e-3;
  po.seed = 5;
  const auto pm = refine::patch_immersion(rc, po);
  // ||H_j - id|| <= C3 eps with a modest measured constant
  CHECK(pm.max_h_norm > 0.0);
  CHECK(pm.max_h_norm <= 50.0 * po.eps_injected);
  CHECK(pm.overlap_residual <= 1e-9 * pm.t + 4.0 * po.eps_injected * pm.t);
  const auto rep = refine::verify_h(pm, 5);
  CHECK(rep.pass);
}

TEST_CASE("verify_h on the identity tower") {
  const auto& A = circle_atlas();
  const auto& B = circle_atlas_fine();
  const auto rc = refine::build_refinement_charts(A, B, 7);
  const auto pm = refine::patch_immersion(rc, {});
  const auto rep = refine::verify_h(pm, 5);
  CHECK(rep.pass);
  CHECK(rep.jacobian_spread <= 1e-6);
  CHECK(rep.injective);
  CHECK(rep.displacement <= 2.0 * A.t);
  CHECK(rep.surjectivity_defect <= 2.0 * A.t);
}
