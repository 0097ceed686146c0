// AVX2 variants. Lane-parallel across points with the same per-element
// operation order as the scalar kernels (mul then add, no FMA), so results
// are bit-identical to the reference and runtime dispatch cannot change any
// reported number.

#include "reifenberg/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace reifenberg::kernels {

namespace {

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d m = _mm_max_pd(lo, hi);
  m = _mm_max_sd(m, _mm_unpackhi_pd(m, m));
  return _mm_cvtsd_f64(m);
}

inline double hmin(__m128d lo, __m128d hi) {
  __m128d m = _mm_min_pd(lo, hi);
  m = _mm_min_sd(m, _mm_unpackhi_pd(m, m));
  return _mm_cvtsd_f64(m);
}

const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));

double avx2_max_abs_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    __m256d d = _mm256_and_pd(_mm256_sub_pd(va, vb), kAbsMask);
    acc = _mm256_max_pd(acc, d);
  }
  double m = hmax(acc);
  for (; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

double avx2_max_abs(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_max_pd(acc, _mm256_and_pd(_mm256_loadu_pd(a + i), kAbsMask));
  double m = hmax(acc);
  for (; i < n; ++i) {
    const double d = std::fabs(a[i]);
    if (d > m) m = d;
  }
  return m;
}

double avx2_min_value(const double* a, std::size_t n) {
  if (n == 0) return 0.0;
  __m256d acc = _mm256_set1_pd(a[0]);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(a + i));
  double m = hmin(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  for (; i < n; ++i)
    if (a[i] < m) m = a[i];
  return m;
}

void avx2_dist2_batch(const double* q, const double* pts, std::size_t count,
                      std::size_t dim, double* out) {
  if (dim == 2) {
    const __m256d q0 = _mm256_set1_pd(q[0]);
    const __m256d q1 = _mm256_set1_pd(q[1]);
    std::size_t i = 0;
    for (; i + 4 <= count; i += 4) {
      __m256d r0 = _mm256_loadu_pd(pts + 2 * i);      // x0 y0 x1 y1
      __m256d r1 = _mm256_loadu_pd(pts + 2 * i + 4);  // x2 y2 x3 y3
      __m256d xs = _mm256_unpacklo_pd(r0, r1);        // x0 x2 y0 y2 (128-lane wise)
      __m256d ys = _mm256_unpackhi_pd(r0, r1);
      // unpack within 128-bit lanes gives (x0,x2 | x1,x3); permute to order
      xs = _mm256_permute4x64_pd(xs, 0b11011000);
      ys = _mm256_permute4x64_pd(ys, 0b11011000);
      __m256d dx = _mm256_sub_pd(xs, q0);
      __m256d dy = _mm256_sub_pd(ys, q1);
      __m256d s = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
      _mm256_storeu_pd(out + i, s);
    }
    for (; i < count; ++i) {
      const double dx = pts[2 * i] - q[0], dy = pts[2 * i + 1] - q[1];
      out[i] = dx * dx + dy * dy;
    }
    return;
  }
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

void avx2_apply_rigid2_batch(const double* Q, const double* v,
                             const double* xs, std::size_t count, double* ys) {
  const __m256d q00 = _mm256_set1_pd(Q[0]);
  const __m256d q01 = _mm256_set1_pd(Q[1]);
  const __m256d q10 = _mm256_set1_pd(Q[2]);
  const __m256d q11 = _mm256_set1_pd(Q[3]);
  const __m256d v0 = _mm256_set1_pd(v[0]);
  const __m256d v1 = _mm256_set1_pd(v[1]);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    __m256d r0 = _mm256_loadu_pd(xs + 2 * i);
    __m256d r1 = _mm256_loadu_pd(xs + 2 * i + 4);
    __m256d x0 = _mm256_permute4x64_pd(_mm256_unpacklo_pd(r0, r1), 0b11011000);
    __m256d x1 = _mm256_permute4x64_pd(_mm256_unpackhi_pd(r0, r1), 0b11011000);
    __m256d y0 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(q00, x0), _mm256_mul_pd(q01, x1)), v0);
    __m256d y1 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(q10, x0), _mm256_mul_pd(q11, x1)), v1);
    __m256d lo = _mm256_unpacklo_pd(y0, y1);
    __m256d hi = _mm256_unpackhi_pd(y0, y1);
    _mm256_storeu_pd(ys + 2 * i, _mm256_permute2f128_pd(lo, hi, 0x20));
    _mm256_storeu_pd(ys + 2 * i + 4, _mm256_permute2f128_pd(lo, hi, 0x31));
  }
  for (; i < count; ++i) {
    const double x0 = xs[2 * i], x1 = xs[2 * i + 1];
    ys[2 * i] = Q[0] * x0 + Q[1] * x1 + v[0];
    ys[2 * i + 1] = Q[2] * x0 + Q[3] * x1 + v[1];
  }
}

const Ops kAvx2 = {avx2_max_abs_diff, avx2_max_abs, avx2_min_value,
                   avx2_dist2_batch, avx2_apply_rigid2_batch, "avx2"};

}  // namespace

const Ops* avx2_ops_if_supported() {
  return __builtin_cpu_supports("avx2") ? &kAvx2 : nullptr;
}

}  // namespace reifenberg::kernels
