#pragma once

// Rigid motions of R^n (orthogonal matrix + translation, reflections
// allowed) and isometry fitting to noisy correspondences.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace reifenberg::rigid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RigidMotion {
  Mat Q;  // orthogonal, det = +-1
  Vec v;

  static RigidMotion identity(int n);
  static RigidMotion rotation2(double theta);
  static RigidMotion translation(const Vec& t);

  int dim() const { return static_cast<int>(Q.rows()); }
  Vec apply(const Vec& x) const { return Q * x + v; }

  // Checks QtQ = I within 1e-12 entrywise and |det| = 1 within 1e-9.
  bool orthonormal() const;
};

RigidMotion compose(const RigidMotion& a, const RigidMotion& b);  // a after b
RigidMotion invert(const RigidMotion& a);

struct FitResult {
  RigidMotion motion;
  double residual = 0.0;  // sup |I(x_k) - y_k| over samples
  bool degenerate = false;
};

// Orthogonal Procrustes on anchor-centered data; the anchor maps exactly
// (I(anchor) = image of anchor). Needs >= n+1 samples. Rank-deficient data
// is flagged degenerate; the returned motion is still well defined.
FitResult fit_isometry(const std::vector<Vec>& points,
                       const std::vector<Vec>& images, std::size_t anchor,
                       double t);

// Operator norm ||Q - I||. Asserts the Lemma bound gap <= 4*eps where eps is
// measured as sup|F(x)-x|/r over the given ball sample; throws
// ContractViolation when the precondition sup|F-id| <= r*eps_bound fails.
double matrix_gap(const RigidMotion& F, const std::vector<Vec>& ball_sample,
                  double r, double eps_bound);

double operator_norm(const Mat& A);

}  // namespace reifenberg::rigid
