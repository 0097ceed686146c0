#include "reifenberg/rigid_motion.hpp"

#include <cmath>

namespace reifenberg::rigid {

RigidMotion RigidMotion::identity(int n) {
  return {Mat::Identity(n, n), Vec::Zero(n)};
}

RigidMotion RigidMotion::rotation2(double theta) {
  Mat Q(2, 2);
  Q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return {Q, Vec::Zero(2)};
}

RigidMotion RigidMotion::translation(const Vec& t) {
  return {Mat::Identity(t.size(), t.size()), t};
}

bool RigidMotion::orthonormal() const {
  const Mat gram = Q.transpose() * Q;
  if ((gram - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff() > 1e-12)
    return false;
  return std::fabs(std::fabs(Q.determinant()) - 1.0) <= 1e-9;
}

RigidMotion compose(const RigidMotion& a, const RigidMotion& b) {
  return {a.Q * b.Q, a.Q * b.v + a.v};
}

RigidMotion invert(const RigidMotion& a) {
  Mat Qt = a.Q.transpose();
  return {Qt, -(Qt * a.v)};
}

double operator_norm(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

FitResult fit_isometry(const std::vector<Vec>& points,
                       const std::vector<Vec>& images, std::size_t anchor,
                       double t) {
  if (points.size() != images.size() || points.empty())
    throw ContractViolation("fit_isometry: sample mismatch");
  const int n = static_cast<int>(points[0].size());
  if (points.size() < static_cast<std::size_t>(n) + 1)
    throw ContractViolation("fit_isometry: need at least n+1 samples");
  if (anchor >= points.size())
    throw ContractViolation("fit_isometry: anchor out of range");

  const Vec a = points[anchor];
  const Vec fa = images[anchor];
  Mat M = Mat::Zero(n, n);
  for (std::size_t k = 0; k < points.size(); ++k)
    M += (images[k] - fa) * (points[k] - a).transpose();

  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  FitResult out;
  out.motion.Q = svd.matrixU() * svd.matrixV().transpose();
  out.motion.v = fa - out.motion.Q * a;
  const double scale = std::max(t, 1e-300);
  out.degenerate =
      svd.singularValues().size() == 0 ||
      svd.singularValues()(n - 1) <= 1e-12 * points.size() * scale * scale;

  auto sup_res = [&](const RigidMotion& m) {
    double res = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k)
      res = std::max(res, (m.apply(points[k]) - images[k]).norm());
    return res;
  };
  out.residual = sup_res(out.motion);

  // The least-squares rotation is not sup-optimal; in the plane polish the
  // angle against the sup objective (anchor-pinned translation), same
  // orientation branch as the seed. Near-exact fits skip the polish.
  if (n == 2 && !out.degenerate && out.residual > 1e-8 * scale) {
    const double det = out.motion.Q.determinant();
    auto motion_at = [&](double th) {
      RigidMotion m = RigidMotion::rotation2(th);
      if (det < 0) m.Q.col(1) = -m.Q.col(1);
      m.v = fa - m.Q * a;
      return m;
    };
    const double seed_th = std::atan2(out.motion.Q(1, 0), out.motion.Q(0, 0));
    // coarse scan around the seed, then ternary refinement
    double best_th = seed_th, best_val = out.residual;
    for (int k = -40; k <= 40; ++k) {
      const double th = seed_th + k * 0.005;
      const double v = sup_res(motion_at(th));
      if (v < best_val) {
        best_val = v;
        best_th = th;
      }
    }
    double lo = best_th - 0.005, hi = best_th + 0.005;
    for (int it = 0; it < 60; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (sup_res(motion_at(m1)) < sup_res(motion_at(m2)))
        hi = m2;
      else
        lo = m1;
    }
    const RigidMotion polished = motion_at(0.5 * (lo + hi));
    const double pres = sup_res(polished);
    if (pres < out.residual) {
      out.motion = polished;
      out.residual = pres;
    }
  }
  return out;
}

double matrix_gap(const RigidMotion& F, const std::vector<Vec>& ball_sample,
                  double r, double eps_bound) {
  double sup = 0.0;
  for (const Vec& x : ball_sample)
    sup = std::max(sup, (F.apply(x) - x).norm());
  if (sup > r * eps_bound * (1.0 + 1e-12))
    throw ContractViolation("matrix_gap: sup|F-id| exceeds r*eps on sample");
  const double gap =
      operator_norm(F.Q - Mat::Identity(F.dim(), F.dim()));
  if (gap > 4.0 * eps_bound * (1.0 + 1e-9))
    throw ContractViolation("matrix_gap: isometry gap bound violated");
  return gap;
}

}  // namespace reifenberg::rigid
