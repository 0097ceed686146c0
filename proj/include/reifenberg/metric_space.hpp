#pragma once

// Finite metric spaces, maximal separated nets and bounded-multiplicity
// colorings. Everything downstream treats the sample itself as the space
// (Z,d); exhaustive scans are fine at this size.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace reifenberg::core {

struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class FiniteMetricSpace {
 public:
  // Distance-matrix constructor. Validates symmetry, zero diagonal and the
  // triangle inequality up to 1e-9 relative slack; throws InvalidInput.
  FiniteMetricSpace(std::vector<std::string> ids, Eigen::MatrixXd dist);

  // Point-cloud constructor; distances are derived from the coordinates.
  FiniteMetricSpace(std::vector<std::string> ids, Eigen::MatrixXd coords,
                    bool from_cloud);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  double dist(std::size_t i, std::size_t j) const { return dist_(i, j); }
  const Eigen::MatrixXd& dist_matrix() const { return dist_; }
  const double* dist_row(std::size_t i) const { return dist_.data() + i * size(); }

  bool has_coords() const { return coords_.has_value(); }
  const Eigen::MatrixXd& coords() const { return *coords_; }
  std::size_t ambient_dim() const { return coords_ ? coords_->cols() : 0; }

  double diameter() const;

  // Half the largest nearest-neighbour gap: the sample's cell radius. Used
  // as the resolution floor by the flatness and atlas machinery.
  double resolution() const;

  // Largest nearest-neighbour gap (the fill distance proxy).
  double fill_distance() const;

  // Rescale all distances (and coordinates) by a factor.
  FiniteMetricSpace scaled(double factor) const;

  // Points within radius of center (indices, ascending).
  std::vector<std::size_t> ball(std::size_t center, double radius) const;

 private:
  void validate() const;
  std::vector<std::string> ids_;
  Eigen::MatrixXd dist_;  // row-major layout matters for dist_row
  std::optional<Eigen::MatrixXd> coords_;
  mutable double cached_fill_ = -1.0;
};

struct Net {
  std::vector<std::size_t> member_indices;
  double radius = 0.0;      // density level
  double separation = 0.0;  // pairwise lower bound
};

struct Coloring {
  std::vector<std::vector<std::size_t>> classes;  // disjoint subsets of the net
  double threshold = 0.0;
};

// Greedy-by-index maximal radius-separated subset; the result is
// radius-dense in the space and radius-separated.
Net build_net(const FiniteMetricSpace& space, double radius);

// Greedy-by-index sequence of maximal threshold-separated classes.
Coloring color_net(const FiniteMetricSpace& space, const Net& net,
                   double threshold);

// max over space points of the distance to the subset.
double density_defect(const FiniteMetricSpace& space,
                      const std::vector<std::size_t>& subset);

}  // namespace reifenberg::core
