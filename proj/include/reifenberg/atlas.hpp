#pragma once

// One-scale glued manifold W_i: charts anchored on a net, fitted rigid
// transitions made exactly compatible by the modification pass, transition
// domains, the sample-to-manifold correspondence, f_i and the
// pseudo-distance.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reifenberg/gh.hpp"
#include "reifenberg/metric_space.hpp"
#include "reifenberg/modification.hpp"
#include "reifenberg/smooth_map.hpp"

namespace reifenberg::atlas {

using core::FiniteMetricSpace;
using modify::ModifiedFamily;
using smooth::SmoothMap;
using smooth::Vec;

struct ManifoldPoint {
  std::size_t chart = 0;  // anchor position in the atlas
  Eigen::VectorXd coords; // inside B_{8t}(0)
};

struct BuildConfig {
  double adjacency_factor = 29.0;  // eq. def-Ii knob (29 vs 30)
  int grid = 9;
  int check_grid = 12;
  std::size_t random_probes = 1000;
  std::uint64_t seed = 0;
  int tml_N = 4;
  double exactness_tol = 1e-11;
  double net_density_factor = 1.0;   // net at factor * t
  double coloring_factor = 100.0;    // coloring threshold factor * t
};

struct PairFit {
  std::size_t a = 0, b = 0;  // anchor positions, a < b; map goes a -> b
  rigid::RigidMotion rigid;
  double residual = 0.0;
  std::size_t samples = 0;
  bool degenerate = false;
};

struct GluingAtlas {
  const FiniteMetricSpace* space = nullptr;
  int scale_i = 0;
  int n = 0;
  double r = 0.0;
  double t = 0.0;             // gluing unit
  double chart_radius = 0.0;
  double fit_radius = 0.0;
  double adjacency_radius = 0.0;
  double defect_radius = 0.0;
  bool resolution_floored = false;
  bool chart_capped = false;
  bool connected = false;

  core::Net net;
  core::Coloring coloring;
  std::vector<std::size_t> anchors;       // = net members
  std::vector<int> anchor_class;          // coloring class per anchor
  std::vector<gh::Chart> charts;          // per anchor
  std::vector<std::vector<std::size_t>> neighbors;  // anchor positions
  std::vector<PairFit> pair_fits;
  ModifiedFamily transitions;             // exact-compatible smooth maps

  // measured certificate inputs
  double eps_fit = 0.0;       // max transition fit residual / t
  double beta_defect = 0.0;   // max triple defect / t
  double sigma = 0.0;         // transition Jacobian singular value spread
  double cocyclicity = 0.0;   // 8t compatibility residual (absolute)
  double hausdorff_margin = 0.0;
  double f_welldef = 0.0;     // worst two-chart disagreement of f_i
  double coverage_defect = 0.0;

  // canonical manifold representative per space point
  std::vector<ManifoldPoint> canonical;

  std::size_t chart_count() const { return anchors.size(); }
  std::size_t anchor_point(std::size_t pos) const { return anchors[pos]; }

  // transition I_{to,from} (from-chart coordinates -> to-chart coordinates)
  SmoothMap transition(std::size_t to, std::size_t from) const;
  bool has_transition(std::size_t a, std::size_t b) const;
  // Omega_{to,from} membership: x in B_8t and I_{to,from}(x) in B_8t
  bool in_domain(std::size_t to, std::size_t from, const Vec& x) const;

  ManifoldPoint apply_transition(const ManifoldPoint& p, std::size_t to) const;
  // alpha_{jmin}(psi_jmin(p)): the represented space point, minimal chart rule
  std::size_t eval_f(const ManifoldPoint& p) const;
  // candidate values across all containing charts; max pairwise d
  double f_spread(const ManifoldPoint& p) const;
  // manifold point over chart of the nearest anchor of z
  ManifoldPoint locate(std::size_t z) const;

  // chart-coordinate estimate of the Riemannian distance with the
  // partition-of-unity metric factor; valid for points sharing a chart
  std::optional<double> chart_distance(const ManifoldPoint& p,
                                       const ManifoldPoint& q) const;
  // rho_i: d_i below 2*2^{-i}-equivalent, ambient distance of f_i images
  // otherwise
  double pseudo_distance(const ManifoldPoint& p, const ManifoldPoint& q) const;

  // partition-of-unity weight of chart j at chart coordinates x of chart j0
  double pu_weight(std::size_t j, std::size_t j0, const Vec& x) const;
};

struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full construction at scale i (gluing unit max(2^-i r/200, fill distance)).
GluingAtlas build_atlas(const FiniteMetricSpace& space,
                        const gh::FlatnessProfile& flatness, int i,
                        const BuildConfig& cfg = {});

// Gluing-data-only construction used by the shared-atlas transport: anchors,
// classes and rigid transitions are given; everything Euclidean is rebuilt
// deterministically. The space is only used for charts/f_i.
GluingAtlas build_atlas_from_gluing_data(
    const FiniteMetricSpace& space, int n, double r, double t,
    const std::vector<std::size_t>& anchors, const std::vector<int>& classes,
    const std::vector<PairFit>& fits, double chart_radius,
    const BuildConfig& cfg = {});

// graph-geodesic estimate over canonical points; infinite when disconnected
struct IntrinsicDistanceResult {
  double value = std::numeric_limits<double>::infinity();
  double mesh_tolerance = 0.0;
  bool connected = false;
};
IntrinsicDistanceResult intrinsic_distance(const GluingAtlas& atlas,
                                           const ManifoldPoint& p,
                                           const ManifoldPoint& q);

}  // namespace reifenberg::atlas
