#pragma once

// Cross-scale structures: parent frames between consecutive atlases, the
// refinement charts, the staged patching of chart-local maps into one
// manifold-to-manifold map h, and its verification.

#include <optional>
#include <vector>

#include "reifenberg/atlas.hpp"

namespace reifenberg::refine {

using atlas::GluingAtlas;
using atlas::ManifoldPoint;
using rigid::RigidMotion;
using smooth::SmoothMap;
using smooth::Vec;

struct RefinementLink {
  std::size_t fine_chart = 0;    // anchor position in the fine atlas
  std::size_t parent = 0;        // anchor position in the coarse atlas
  RigidMotion K;                 // fine chart coords -> coarse chart coords
  double residual = 0.0;         // sup |K - beta_coarse o alpha_fine|
  double inverse_residual = 0.0; // other-side residual
};

struct RefinementCharts {
  const GluingAtlas* coarse = nullptr;
  const GluingAtlas* fine = nullptr;
  std::vector<RefinementLink> links;  // one per fine chart
  double coverage_radius = 0.0;       // measured sup |phi^-1(w)| on samples
  double phiphi_residual = 0.0;       // transition closeness to the fine atlas

  // phi_j^{-1}(w) for w given in coarse chart k(j) representation
  std::optional<Vec> phi_inverse(std::size_t fine_chart,
                                 const ManifoldPoint& w) const;
};

RefinementCharts build_refinement_charts(const GluingAtlas& coarse,
                                         const GluingAtlas& fine,
                                         int grid = 9);

struct StageRow {
  int stage = 0;
  std::size_t charts = 0;
  std::size_t blended = 0;
  double eta_k = 0.0;        // tolerance carried into this stage
  double max_h_norm = 0.0;   // worst ||H_j - id||_{C1,t}
};

struct PatchedMap {
  const RefinementCharts* charts = nullptr;
  double t = 0.0;                 // patch scale (2 * coarse unit)
  std::vector<SmoothMap> H;       // per fine chart, on B_{2t}(0)
  std::vector<SmoothMap> perturbations;  // injected locals (tests); id normally
  std::vector<int> stage_of;      // color class stage per fine chart
  std::vector<StageRow> ledger;
  double max_h_norm = 0.0;        // max ||H_j - id||_{C1,t}
  double overlap_residual = 0.0;  // chart-local formula disagreement

  // h(w): pick the covering chart of minimal (stage, index), return the fine
  // point. The chart-local formulas agree on overlaps, so a caller-supplied
  // hint (the fine chart near w) only short-circuits the search.
  ManifoldPoint apply(const ManifoldPoint& w) const;
  ManifoldPoint apply(const ManifoldPoint& w, std::size_t fine_hint) const;
};

struct PatchOptions {
  int grid = 9;
  double eps_injected = 0.0;  // extra per-chart perturbation (tests)
  std::uint64_t seed = 0;
};

// Staged gluing over the fine atlas coloring classes; the per-chart local
// maps are h_j = psi_fine^-1 o phi_j^-1 (optionally perturbed for the
// contract tests).
PatchedMap patch_immersion(const RefinementCharts& charts,
                           const PatchOptions& opt = {});

struct VerifyReport {
  bool pass = false;
  double jacobian_spread = 0.0;   // kappa: singular values in [1/(1+k),1+k]
  double injectivity_margin = 0.0;
  bool injective = false;
  double surjectivity_defect = 0.0;
  double displacement = 0.0;      // sup d(f_{i+1}(h(w)), f_i(w))
  std::string witness;
};

VerifyReport verify_h(const PatchedMap& h, int grid = 7);

}  // namespace reifenberg::refine
