#include "reifenberg/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace reifenberg::kernels {

namespace {

double scalar_max_abs_diff(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

double scalar_max_abs(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i]);
    if (d > m) m = d;
  }
  return m;
}

double scalar_min_value(const double* a, std::size_t n) {
  double m = n ? a[0] : 0.0;
  for (std::size_t i = 1; i < n; ++i)
    if (a[i] < m) m = a[i];
  return m;
}

void scalar_dist2_batch(const double* q, const double* pts, std::size_t count,
                        std::size_t dim, double* out) {
  for (std::size_t i = 0; i < count; ++i) {
    const double* p = pts + i * dim;
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = p[k] - q[k];
      s += d * d;
    }
    out[i] = s;
  }
}

void scalar_apply_rigid2_batch(const double* Q, const double* v,
                               const double* xs, std::size_t count,
                               double* ys) {
  const double q00 = Q[0], q01 = Q[1], q10 = Q[2], q11 = Q[3];
  const double v0 = v[0], v1 = v[1];
  for (std::size_t i = 0; i < count; ++i) {
    const double x0 = xs[2 * i], x1 = xs[2 * i + 1];
    ys[2 * i] = q00 * x0 + q01 * x1 + v0;
    ys[2 * i + 1] = q10 * x0 + q11 * x1 + v1;
  }
}

const Ops kScalar = {scalar_max_abs_diff, scalar_max_abs, scalar_min_value,
                     scalar_dist2_batch, scalar_apply_rigid2_batch, "scalar"};

const Ops& pick_active() {
  if (const Ops* o = avx2_ops_if_supported()) return *o;
  return kScalar;
}

}  // namespace

const Ops& scalar_ops() { return kScalar; }

const Ops& ops() {
  static const Ops& active = pick_active();
  return active;
}

std::string active_kernel_name() { return ops().name; }

#if !defined(REIFENBERG_HAVE_AVX2_TU)
const Ops* avx2_ops_if_supported() { return nullptr; }
#endif

}  // namespace reifenberg::kernels
