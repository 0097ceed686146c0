#include "reifenberg/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reifenberg/kernels.hpp"

namespace reifenberg::core {

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::string> ids,
                                     Eigen::MatrixXd dist)
    : ids_(std::move(ids)), dist_(std::move(dist)) {
  if (ids_.empty()) throw InvalidInput("empty space");
  if (dist_.rows() != dist_.cols() ||
      static_cast<std::size_t>(dist_.rows()) != ids_.size())
    throw InvalidInput("distance matrix shape mismatch");
  validate();
}

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::string> ids,
                                     Eigen::MatrixXd coords, bool)
    : ids_(std::move(ids)) {
  if (ids_.empty()) throw InvalidInput("empty space");
  if (static_cast<std::size_t>(coords.rows()) != ids_.size())
    throw InvalidInput("coordinate count mismatch");
  const auto n = coords.rows();
  dist_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist_(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (coords.row(i) - coords.row(j)).norm();
      dist_(i, j) = d;
      dist_(j, i) = d;
    }
  }
  coords_ = std::move(coords);
}

void FiniteMetricSpace::validate() const {
  const auto n = dist_.rows();
  const double scale = std::max(1.0, dist_.maxCoeff());
  const double tol = 1e-9 * scale;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(dist_(i, i)) > tol)
      throw InvalidInput("nonzero diagonal at " + std::to_string(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (dist_(i, j) < -tol) throw InvalidInput("negative distance");
      if (std::fabs(dist_(i, j) - dist_(j, i)) > tol)
        throw InvalidInput("asymmetric distance matrix");
    }
  }
  // Triangle inequality. Exhaustive below 1024 points; above that every
  // pair is checked against a strided witness set (full O(n^3) would take
  // tens of seconds at atlas-fixture sizes).
  std::vector<Eigen::Index> witnesses;
  if (n <= 1024) {
    witnesses.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) witnesses[k] = k;
  } else {
    const Eigen::Index stride = n / 64;
    for (Eigen::Index k = 0; k < n; k += stride) witnesses.push_back(k);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dij = dist_(i, j);
      const double* ri = dist_.data() + i * n;  // column i == row i (symmetry)
      const double* rj = dist_.data() + j * n;
      for (Eigen::Index k : witnesses) {
        if (dij > ri[k] + rj[k] + tol)
          throw InvalidInput("triangle inequality violated at (" +
                             std::to_string(i) + "," + std::to_string(j) +
                             "," + std::to_string(k) + ")");
      }
    }
  if (coords_) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = (coords_->row(i) - coords_->row(j)).norm();
        if (std::fabs(d - dist_(i, j)) > tol)
          throw InvalidInput("coordinates inconsistent with distances");
      }
  }
}

double FiniteMetricSpace::diameter() const { return dist_.maxCoeff(); }

double FiniteMetricSpace::fill_distance() const {
  if (cached_fill_ >= 0.0) return cached_fill_;
  const auto n = dist_.rows();
  if (n == 1) {
    cached_fill_ = 0.0;
    return 0.0;
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double nn = std::numeric_limits<double>::infinity();
    const double* row = dist_.data() + i * n;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && row[j] < nn) nn = row[j];
    worst = std::max(worst, nn);
  }
  cached_fill_ = worst;
  return worst;
}

double FiniteMetricSpace::resolution() const { return 0.5 * fill_distance(); }

FiniteMetricSpace FiniteMetricSpace::scaled(double factor) const {
  if (coords_) {
    FiniteMetricSpace s(ids_, *coords_ * factor, true);
    return s;
  }
  return FiniteMetricSpace(ids_, dist_ * factor);
}

std::vector<std::size_t> FiniteMetricSpace::ball(std::size_t center,
                                                 double radius) const {
  std::vector<std::size_t> out;
  const double* row = dist_row(center);
  for (std::size_t j = 0; j < size(); ++j)
    if (row[j] < radius) out.push_back(j);
  return out;
}

Net build_net(const FiniteMetricSpace& space, double radius) {
  if (radius <= 0.0) throw InvalidInput("net radius must be positive");
  if (space.size() == 0) throw InvalidInput("empty space");
  Net net;
  net.radius = radius;
  net.separation = radius;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double* row = space.dist_row(i);
    bool ok = true;
    for (std::size_t m : net.member_indices)
      if (row[m] < radius) {
        ok = false;
        break;
      }
    if (ok) net.member_indices.push_back(i);
  }
  return net;
}

Coloring color_net(const FiniteMetricSpace& space, const Net& net,
                   double threshold) {
  if (threshold <= 0.0) throw InvalidInput("color threshold must be positive");
  Coloring coloring;
  coloring.threshold = threshold;
  std::vector<std::size_t> remaining = net.member_indices;
  while (!remaining.empty()) {
    std::vector<std::size_t> cls;
    std::vector<std::size_t> rest;
    for (std::size_t p : remaining) {
      const double* row = space.dist_row(p);
      bool ok = true;
      for (std::size_t q : cls)
        if (row[q] < threshold) {
          ok = false;
          break;
        }
      if (ok)
        cls.push_back(p);
      else
        rest.push_back(p);
    }
    coloring.classes.push_back(std::move(cls));
    remaining = std::move(rest);
  }
  return coloring;
}

double density_defect(const FiniteMetricSpace& space,
                      const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw InvalidInput("density_defect of empty subset");
  std::vector<double> buf(subset.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double* row = space.dist_row(i);
    for (std::size_t k = 0; k < subset.size(); ++k) buf[k] = row[subset[k]];
    worst = std::max(worst, kernels::ops().min_value(buf.data(), buf.size()));
  }
  return worst;
}

}  // namespace reifenberg::core
