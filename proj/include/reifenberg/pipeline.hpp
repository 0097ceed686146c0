#pragma once

// The tower W_m -> W_{m+1} -> ..., the finite-depth parametrization F, the
// certification report for properties a)-e) and the distortion sandwiches,
// and the shared-atlas transport between GH-close spaces.

#include <memory>
#include <string>
#include <vector>

#include "reifenberg/refine.hpp"

namespace reifenberg::pipeline {

using atlas::GluingAtlas;
using atlas::ManifoldPoint;
using core::FiniteMetricSpace;

struct TowerConfig {
  atlas::BuildConfig build;
  int grid = 9;
  std::size_t probe_pairs = 10000;
  std::uint64_t seed = 0;
};

struct TowerState {
  const FiniteMetricSpace* space = nullptr;
  double r = 0.0;
  int n = 0;
  int m = 0;  // start scale
  int depth = 0;
  gh::FlatnessProfile flatness;
  std::vector<GluingAtlas> atlases;             // scales m..depth
  std::vector<refine::RefinementCharts> links;  // between consecutive scales
  std::vector<refine::PatchedMap> maps;         // h_i
  std::vector<double> eps_hat;                  // measured per-scale epsilon
  std::vector<double> increments;               // sup d(F_{i+1}, F_i)
  // trajectory of every space point through the tower (indices into scales)
  std::vector<std::vector<ManifoldPoint>> trajectory;
  double theta_m = 0.0;  // sup of eps_hat
  double holder_alpha = 0.0;
  double prop_b_constant = 0.0;

  const GluingAtlas& at(int i) const { return atlases.at(i - m); }
  // product tail from scale k (1-based factors over k..depth-1)
  double tail_product(int k) const;
};

TowerState run_tower(const FiniteMetricSpace& space, double r, int n, int m,
                     int depth, const TowerConfig& cfg = {});

struct Criterion {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::size_t probes = 0;
  std::string witness;
};

struct CertificationReport {
  bool pass = false;
  std::vector<Criterion> criteria;
  double surjectivity_defect = 0.0;
  double holder_alpha = 0.0;
  double lipschitz_tail = 0.0;
  std::string config_echo;

  const Criterion* find(const std::string& name) const;
};

CertificationReport certify(const TowerState& tower,
                            const TowerConfig& cfg = {});

struct SharedAtlasResult {
  bool admissible = false;
  double roundtrip_defect = 0.0;
  double transported_density = 0.0;
  double separation_slack = 0.0;
  double isom_closeness = 0.0;
  std::string failed_check;
  GluingAtlas atlas1;
  GluingAtlas atlas2;
  bool identical_structure = false;  // (J0, coloring, adjacency) equal
  bool identical_maps = false;       // serialized transition trees equal
};

// Transport of the scale-0 gluing inputs from space1 to space2 along the
// correspondence (phi_fwd: 1->2 indices, phi_bwd: 2->1), verification of the
// strengthened net conditions, and both deterministic builds.
SharedAtlasResult shared_atlas(const FiniteMetricSpace& space1,
                               const FiniteMetricSpace& space2,
                               const std::vector<std::size_t>& phi_fwd,
                               const std::vector<std::size_t>& phi_bwd,
                               double delta, double r, int n,
                               const TowerConfig& cfg = {});

}  // namespace reifenberg::pipeline
