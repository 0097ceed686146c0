#pragma once

// Cocyclicity calculus and the mappings-modification algorithm: three-maps
// modification per triple, then the staged pass over class triples that
// makes a whole isometry family exactly compatible at the gluing scale.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "reifenberg/smooth_map.hpp"

namespace reifenberg::modify {

using rigid::RigidMotion;
using smooth::Region;
using smooth::SmoothMap;
using smooth::Vec;

struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Max over the three index patterns and probe points x in B_r(0) with the
// whole chain inside B_r(0) of |I_ca(x) - I_cb(I_ba(x))|. Maps are given as
// I21, I31, I32 (inverses derived); probes = grid(G per axis) + extra points.
double cocyclicity_residual(const SmoothMap& I21, const SmoothMap& I31,
                            const SmoothMap& I32, double r, int G,
                            const std::vector<Vec>& extra_probes = {});

struct PropTrickReport {
  bool pass = false;
  double cross_residual = 0.0;    // worst almost-cocyclicity residual
  double pattern123_residual = 0.0;
  double residual_at_shrunk = 0.0;
};

// Prop-style check: pairwise pattern residuals < eps on B_r and the (1,2,3)
// pattern exact on the grid imply cocyclicity at r - eps.
PropTrickReport prop_trick_check(const SmoothMap& I21, const SmoothMap& I31,
                                 const SmoothMap& I32, double r, double eps,
                                 double t, int G);

struct TmlOptions {
  double t = 1.0;
  double r = 10.0;  // working radius in units of t
  int N = 4;        // shrink parameter: U1 at (1-1/2N) r t
  int grid = 9;
  double exactness_tol = 1e-11;  // defect below this (in t units): no-op
};

struct TmlResult {
  SmoothMap I32_new;
  bool modified = false;
  double defect = 0.0;        // measured sup |I32 I21 - I31| / t on B_rt
  double eps_used = 0.0;      // blend's measured eps
  double c2_change = 0.0;     // || I32_new - I32 ||_{C2,t} on the support
  double blend_bound = 0.0;   // documented C1 * eps
  Vec support_center;         // blend support, empty if unmodified
  double support_radius = 0.0;
};

// Three-maps modification: returns a corrected I32 that is exactly
// compatible with I21, I31 on the chain sets inside B_{(1-1/2N) r t} and
// untouched outside I21(B_{rt}(0)). refs are the rigid references backing
// the hypothesis checks.
TmlResult tml_modify(const SmoothMap& I21, const SmoothMap& I31,
                     const SmoothMap& I32, const RigidMotion& R21,
                     const RigidMotion& R31, const RigidMotion& R32,
                     const TmlOptions& opt);

struct IsometryFamily {
  std::size_t count = 0;          // |J|
  std::vector<int> cls;           // n(j) in 1..N
  int num_classes = 0;
  double t = 1.0;
  // adjacency with one stored orientation per unordered pair (a<b), the map
  // going from a-coordinates to b-coordinates
  std::map<std::pair<std::size_t, std::size_t>, RigidMotion> maps;

  bool adjacent(std::size_t a, std::size_t b) const {
    return maps.count({std::min(a, b), std::max(a, b)}) > 0;
  }
  // I_{to,from}: from-coordinates -> to-coordinates
  RigidMotion rigid_map(std::size_t to, std::size_t from) const;
};

struct LedgerRow {
  int step = 0;
  int a3 = 0, a2 = 0, a1 = 0;   // class triple
  std::size_t triples = 0;
  double radius = 0.0;          // working radius r_k (units of t)
  double beta_k = 0.0;          // bookkeeping tolerance (C1+1)^k beta
  double max_defect = 0.0;
  double max_c2_change = 0.0;
  std::size_t skipped_exact = 0;
};

struct ModifiedFamily {
  std::size_t count = 0;
  std::vector<int> cls;
  double t = 1.0;
  struct Stored {
    std::size_t from = 0, to = 0;
    SmoothMap map;  // from-coords -> to-coords
    double c2_change = 0.0;
  };
  std::map<std::pair<std::size_t, std::size_t>, Stored> maps;
  std::vector<LedgerRow> ledger;
  double beta = 0.0;               // measured hypothesis-C defect (in t units)
  double max_c2_change = 0.0;      // max ||Itilde - I||_{C2,t}
  double final_residual = 0.0;     // 8t-cocyclicity residual (absolute)
  int repair_passes = 0;

  bool adjacent(std::size_t a, std::size_t b) const {
    return maps.count({std::min(a, b), std::max(a, b)}) > 0;
  }
  // Itilde_{to,from}; the reverse orientation is an exact inverse node.
  SmoothMap map_between(std::size_t to, std::size_t from) const;
};

struct ModifyOptions {
  int tml_N = 4;
  int grid = 9;
  int check_grid = 16;
  std::size_t random_probes = 1000;
  std::uint64_t seed = 0;
  int max_repair_passes = 3;
  double exactness_tol = 1e-11;
};

// The staged modification pass: verifies the hypotheses, runs the class
// triple enumeration (T_1=(3,2,1), T_2=(4,2,1), ...) with working radius
// r_k = 10 - (k-1)/N^3, then verifies the 8t compatibility condition and
// reprocesses violating triples (bounded repair passes).
ModifiedFamily modify_family(const IsometryFamily& family,
                             const ModifyOptions& opt = {});

// 8t-compatibility sweep used by the final verification and the acceptance
// suite: worst cocyclicity residual over all admissible chain triples.
double family_compatibility_residual(const ModifiedFamily& fam, int G,
                                     std::size_t random_probes,
                                     std::uint64_t seed);

// Synthetic test family: clusters of three nearby chart frames, exactly
// compatible before a rigid defect of size ~beta (in t units) is injected
// into every stored map. Drives modify-demo and the modification tests.
IsometryFamily synthetic_family(std::size_t count, int num_classes,
                                double beta, std::uint64_t seed, int n = 2,
                                double t = 1.0);

}  // namespace reifenberg::modify
