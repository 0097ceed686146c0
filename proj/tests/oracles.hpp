#pragma once

// Independent oracles used to freeze expected values: brute-force rigid
// alignment (angle scan) and helpers shared by the acceptance suite.

#include <cmath>
#include <vector>

#include "reifenberg/rigid_motion.hpp"

namespace oracles {

using reifenberg::rigid::RigidMotion;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// 2D brute force: scan the rotation angle on a grid (both orientations),
// translation pinned exactly by the anchor (the I(0)=f(0) normalization).
// Returns the minimal sup-residual.
inline double brute_force_isometry_2d(const std::vector<Vec>& pts,
                                      const std::vector<Vec>& imgs,
                                      std::size_t anchor, double angle_step) {
  const Vec a = pts[anchor];
  const Vec fa = imgs[anchor];
  double best = std::numeric_limits<double>::infinity();
  for (int refl = 0; refl < 2; ++refl) {
    for (double th = 0.0; th < 2.0 * M_PI; th += angle_step) {
      Mat Q(2, 2);
      Q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      if (refl) Q.col(1) = -Q.col(1);
      const Vec v = fa - Q * a;
      double sup = 0.0;
      for (std::size_t k = 0; k < pts.size(); ++k)
        sup = std::max(sup, (Q * pts[k] + v - imgs[k]).norm());
      best = std::min(best, sup);
    }
  }
  return best;
}

}  // namespace oracles
