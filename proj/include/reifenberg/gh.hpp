#pragma once

// delta-isometries, GH-approximation maps, rough charts (PCA projection for
// point clouds, classical MDS for abstract metric inputs) and the dyadic
// flatness coefficients.

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "reifenberg/metric_space.hpp"

namespace reifenberg::gh {

using core::FiniteMetricSpace;

// row-major so the point batches feed the kernels directly
using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A map between two sampled subsets, given positionally.
struct SampledMap {
  const FiniteMetricSpace* src_space = nullptr;
  std::vector<std::size_t> src;  // point indices
  const FiniteMetricSpace* tgt_space = nullptr;
  std::vector<std::size_t> tgt;
  std::vector<std::size_t> map;  // src position -> tgt position
  double delta = 0.0;            // declared quality
};

// Exact max over all source pairs of |d_tgt(f(x),f(y)) - d_src(x,y)|.
double distortion(const SampledMap& f);

// Max over target points of the distance to the image.
double image_density_defect(const SampledMap& f);

struct AlmostInverseResult {
  SampledMap g;
  double distortion = 0.0;
  double roundtrip_src = 0.0;  // sup d(g(f(x)), x)
  double roundtrip_tgt = 0.0;  // sup d(f(g(y)), y)
};

// For each target point picks the first source point (index order) mapping
// within f.delta. Throws ContractViolation when f is not delta-dense.
AlmostInverseResult almost_inverse(const SampledMap& f);

// One rough chart: beta maps the metric ball into R^n with beta(center)=0
// exact; alpha is the nearest-image almost inverse.
struct Chart {
  std::size_t center = 0;
  double radius = 0.0;
  std::vector<std::size_t> ball;  // ascending point indices
  RowMat coords;                  // |ball| x n
  double distortion = 0.0;        // measured pairwise metric distortion
  double covering_excess = 0.0;   // covering defect beyond the sample fill
  double delta = 0.0;             // max(distortion, covering_excess)
  bool rank_deficient = false;

  int n() const { return static_cast<int>(coords.cols()); }
  // Position of point index p in the ball, or npos.
  std::size_t position(std::size_t p) const;
  Eigen::VectorXd beta(std::size_t p) const;
  // Nearest-image preimage (lowest index on ties).
  std::size_t alpha(const Eigen::VectorXd& x) const;
};

// measure_covering controls the probe-lattice covering scan (needed by the
// flatness profile; the atlas path skips it). A nonzero stored_radius caps
// the retained ball: everything the gluing machinery touches lives within
// ~76t of the anchor, so atlases avoid holding whole 200t balls per chart.
Chart make_chart(const FiniteMetricSpace& space, std::size_t center,
                 double radius, int n, bool measure_covering = true,
                 double stored_radius = 0.0);

struct FlatnessScale {
  double radius = 0.0;
  double eps = std::numeric_limits<double>::infinity();
  bool resolution_limited = false;
  bool no_interior_center = false;
  std::size_t witness_center = 0;  // center achieving the max
  std::size_t centers_tested = 0;
};

struct FlatnessProfile {
  double r = 0.0;
  int n = 0;
  std::vector<FlatnessScale> scales;  // index i = dyadic scale

  bool certified(std::size_t i) const {
    return i < scales.size() && !scales[i].resolution_limited &&
           !scales[i].no_interior_center;
  }
};

// eps[i] = (2^i/r) * 2 * max over admitted net centers of
// (distortion + covering excess) of the ball chart at radius 2^-i r.
// Scales where the sample resolution exceeds radius/8 are flagged.
FlatnessProfile flatness_profile(const FiniteMetricSpace& space, double r,
                                 int n, int depth);

}  // namespace reifenberg::gh
